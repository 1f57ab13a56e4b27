// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Training corpora: normalized STFT frames with per-frame chroma labels and
// clip-level train/validation/test splits, plus the TCV1 file codec.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "timbrelab/chroma.hpp"
#include "timbrelab/dsp.hpp"

namespace timbrelab::corpus {

enum class Split : std::uint8_t { kTrain = 0, kValidation = 1, kTest = 2 };

std::string_view to_string(Split split);
/// Accepts "train", "validation" (or "val"), "test".
Split parse_split(std::string_view name);

enum class Augmentation { kNone, kChroma, kFirstOrderDiff };

std::string_view to_string(Augmentation augmentation);
/// Accepts "none", "chroma", "first_order_diff" (or "diff").
Augmentation parse_augmentation(std::string_view name);

struct ClipSpec {
  std::filesystem::path path;
  Split split = Split::kTrain;
  std::string clip_id;
};

/// Clip already decoded to audio (generated material, tests).
struct ClipAudio {
  ClipSpec spec;
  dsp::AudioBuffer audio;
};

struct ClipRecord {
  std::string clip_id;
  Split split = Split::kTrain;
  std::string path;
  std::size_t first_frame = 0;
  std::size_t frame_count = 0;
};

struct BuildOptions {
  Augmentation augmentation = Augmentation::kChroma;
  std::uint64_t seed = 0;
  /// Recorded only; the trainer skips silent frames when set.
  bool drop_silent = false;
  /// Resample non-44.1 kHz input instead of rejecting it.
  bool resample = false;
};

struct Corpus {
  std::size_t bins = dsp::kBins;
  std::vector<float> frames;  // size() x bins, row-major
  std::vector<float> peaks;
  std::vector<std::int8_t> chroma_class;  // -1 for frames with no note energy
  std::vector<Split> splits;
  std::vector<std::uint32_t> clip_of_frame;

  std::size_t fft_size = dsp::kFftSize;
  std::size_t hop = dsp::kHop;
  double sample_rate = dsp::kSampleRate;
  Augmentation augmentation = Augmentation::kChroma;
  std::uint64_t seed = 0;
  bool drop_silent = false;
  std::vector<ClipRecord> clips;  // sorted by clip_id; frames are contiguous per clip

  std::size_t size() const { return peaks.size(); }
  std::span<const float> frame(std::size_t i) const { return {frames.data() + i * bins, bins}; }
  /// Preceding frame of the same clip, empty for a clip's first frame.
  std::span<const float> previous(std::size_t i) const;
  chroma::ChromaVector chroma(std::size_t i) const;
  bool silent(std::size_t i) const { return chroma_class[i] < 0; }
  std::size_t silent_count() const;

  /// Frame indices of `split` in storage order, optionally without silent frames.
  std::vector<std::size_t> indices(Split split, bool skip_silent = false) const;
  /// Sorted pitch classes present among the frames of `split`.
  std::vector<int> classes(Split split) const;

  /// Throws kInvalidFrame / kCorruptFile when an invariant is broken.
  void validate() const;
};

/// Frames every clip, normalizes, labels chroma (computed on the raw
/// magnitudes) and orders the result by clip_id.
Corpus build_corpus(std::vector<ClipAudio> clips, const BuildOptions& options = {});
/// Reads each clip's WAV file first. Read errors carry the clip's path.
Corpus build_corpus(const std::vector<ClipSpec>& clips, const BuildOptions& options = {});

/// JSON array of {path, split, clip_id}; relative paths resolve against the
/// manifest's directory.
std::vector<ClipSpec> read_manifest(const std::filesystem::path& path);

inline constexpr std::uint32_t kCorpusFormatVersion = 1;

nlohmann::json metadata(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, std::ostream& out);
Corpus load_corpus(const std::filesystem::path& path);

/// FNV-1a 64 of the serialized corpus, as 16 hex digits.
std::string corpus_hash(const Corpus& corpus);

}  // namespace timbrelab::corpus
