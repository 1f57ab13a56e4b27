// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "timbrelab/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "binary_io.hpp"
#include "timbrelab/error.hpp"
#include "timbrelab/wav.hpp"

namespace timbrelab::corpus {
namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'T', 'C', 'V', '1'};

[[noreturn]] void corrupt(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::kCorruptFile, where + ": " + what);
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "validation" || name == "val") return Split::kValidation;
  if (name == "test") return Split::kTest;
  throw Error(ErrorKind::kInvalidArgument, "unknown split '" + std::string(name) + "'");
}

std::string_view to_string(Augmentation augmentation) {
  switch (augmentation) {
    case Augmentation::kNone: return "none";
    case Augmentation::kChroma: return "chroma";
    case Augmentation::kFirstOrderDiff: return "first_order_diff";
  }
  return "none";
}

Augmentation parse_augmentation(std::string_view name) {
  if (name == "none") return Augmentation::kNone;
  if (name == "chroma") return Augmentation::kChroma;
  if (name == "first_order_diff" || name == "diff") return Augmentation::kFirstOrderDiff;
  throw Error(ErrorKind::kInvalidArgument,
              "unknown augmentation '" + std::string(name) + "'");
}

std::span<const float> Corpus::previous(std::size_t i) const {
  const auto& clip = clips[clip_of_frame[i]];
  if (i == clip.first_frame) return {};
  return frame(i - 1);
}

chroma::ChromaVector Corpus::chroma(std::size_t i) const {
  return chroma_class[i] < 0 ? chroma::ChromaVector::silence()
                             : chroma::ChromaVector::of_class(chroma_class[i]);
}

std::size_t Corpus::silent_count() const {
  return static_cast<std::size_t>(
      std::count_if(chroma_class.begin(), chroma_class.end(), [](auto c) { return c < 0; }));
}

std::vector<std::size_t> Corpus::indices(Split split, bool skip_silent) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i) {
    if (splits[i] == split && !(skip_silent && silent(i))) out.push_back(i);
  }
  return out;
}

std::vector<int> Corpus::classes(Split split) const {
  std::set<int> present;
  for (std::size_t i = 0; i < size(); ++i) {
    if (splits[i] == split && chroma_class[i] >= 0) present.insert(chroma_class[i]);
  }
  return {present.begin(), present.end()};
}

void Corpus::validate() const {
  const std::size_t m = size();
  if (frames.size() != m * bins || chroma_class.size() != m || splits.size() != m ||
      clip_of_frame.size() != m) {
    throw Error(ErrorKind::kCorruptFile, "corpus arrays have inconsistent lengths");
  }
  std::set<std::string> ids;
  std::size_t expected_first = 0;
  for (std::size_t c = 0; c < clips.size(); ++c) {
    const auto& clip = clips[c];
    if (!ids.insert(clip.clip_id).second) {
      throw Error(ErrorKind::kCorruptFile, "clip '" + clip.clip_id + "' appears twice");
    }
    if (clip.first_frame != expected_first || clip.first_frame + clip.frame_count > m) {
      throw Error(ErrorKind::kCorruptFile, "clip '" + clip.clip_id + "' has a bad frame range");
    }
    for (std::size_t i = clip.first_frame; i < clip.first_frame + clip.frame_count; ++i) {
      if (splits[i] != clip.split || clip_of_frame[i] != c) {
        throw Error(ErrorKind::kCorruptFile,
                    "frame " + std::to_string(i) + " disagrees with clip '" + clip.clip_id + "'");
      }
    }
    expected_first += clip.frame_count;
  }
  if (expected_first != m) throw Error(ErrorKind::kCorruptFile, "clips do not cover all frames");

  for (std::size_t i = 0; i < m; ++i) {
    const auto f = frame(i);
    float top = 0.0f;
    for (float v : f) {
      if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
        throw Error(ErrorKind::kInvalidFrame,
                    "frame " + std::to_string(i) + " has a value outside [0,1]");
      }
      top = std::max(top, v);
    }
    const bool zero_peak = peaks[i] == 0.0f;
    if (!std::isfinite(peaks[i]) || peaks[i] < 0.0f || (zero_peak ? top != 0.0f : top != 1.0f)) {
      throw Error(ErrorKind::kInvalidFrame, "frame " + std::to_string(i) + " is not normalized");
    }
    if (chroma_class[i] < -1 || chroma_class[i] >= static_cast<int>(chroma::kClasses)) {
      throw Error(ErrorKind::kCorruptFile, "frame " + std::to_string(i) + " has a bad chroma label");
    }
  }
}

Corpus build_corpus(std::vector<ClipAudio> clips, const BuildOptions& options) {
  if (clips.empty()) throw Error(ErrorKind::kEmptyCorpus, "no clips given");
  std::sort(clips.begin(), clips.end(),
            [](const auto& a, const auto& b) { return a.spec.clip_id < b.spec.clip_id; });
  bool any_train = false;
  for (std::size_t c = 0; c < clips.size(); ++c) {
    if (clips[c].spec.clip_id.empty()) {
      throw Error(ErrorKind::kInvalidArgument, "clip with empty clip_id");
    }
    if (c > 0 && clips[c].spec.clip_id == clips[c - 1].spec.clip_id) {
      throw Error(ErrorKind::kInvalidArgument,
                  "clip_id '" + clips[c].spec.clip_id + "' is used more than once");
    }
    any_train = any_train || clips[c].spec.split == Split::kTrain;
  }
  if (!any_train) throw Error(ErrorKind::kInvalidArgument, "corpus needs at least one train clip");

  Corpus corpus;
  corpus.augmentation = options.augmentation;
  corpus.seed = options.seed;
  corpus.drop_silent = options.drop_silent;

  for (auto& clip : clips) {
    ClipRecord record{clip.spec.clip_id, clip.spec.split, clip.spec.path.generic_string(),
                      corpus.size(), 0};
    dsp::AudioBuffer audio = std::move(clip.audio);
    if (audio.sample_rate != dsp::kSampleRate) {
      if (!options.resample) {
        throw Error(ErrorKind::kInvalidArgument,
                    "clip '" + record.clip_id + "' is sampled at " +
                        std::to_string(audio.sample_rate) + " Hz (use --resample)");
      }
      audio = wav::resample_linear(audio, dsp::kSampleRate);
    }
    if (dsp::frame_count(audio.samples.size()) > 0) {
      const auto spec = dsp::stft(audio);
      for (std::size_t f = 0; f < spec.frames; ++f) {
        const auto raw = spec.magnitude(f);
        const auto label = chroma::one_hot_chroma(chroma::frame_chromagram(raw));
        const auto normalized = dsp::normalize_frame(raw);
        corpus.frames.insert(corpus.frames.end(), normalized.magnitudes.begin(),
                             normalized.magnitudes.end());
        corpus.peaks.push_back(normalized.peak);
        corpus.chroma_class.push_back(
            static_cast<std::int8_t>(label.class_index.value_or(-1)));
        corpus.splits.push_back(record.split);
        corpus.clip_of_frame.push_back(static_cast<std::uint32_t>(corpus.clips.size()));
      }
      record.frame_count = spec.frames;
    }
    corpus.clips.push_back(std::move(record));
  }
  if (corpus.size() == 0) {
    throw Error(ErrorKind::kEmptyCorpus, "no clip is long enough for one frame");
  }
  return corpus;
}

Corpus build_corpus(const std::vector<ClipSpec>& clips, const BuildOptions& options) {
  std::vector<ClipAudio> decoded;
  decoded.reserve(clips.size());
  wav::ReadOptions read;
  read.resample = options.resample;
  for (const auto& spec : clips) {
    try {
      decoded.push_back({spec, wav::read(spec.path, read)});
    } catch (const Error& e) {
      const std::string what = e.what();
      const std::string path = spec.path.string();
      throw Error(e.kind(), what.find(path) == std::string::npos ? path + ": " + what : what);
    }
  }
  return build_corpus(std::move(decoded), options);
}

std::vector<ClipSpec> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kInvalidArgument, path.string() + ": " + e.what());
  }
  if (!j.is_array()) throw Error(ErrorKind::kInvalidArgument, path.string() + ": expected an array");
  std::vector<ClipSpec> clips;
  const auto base = path.parent_path();
  for (const auto& entry : j) {
    try {
      ClipSpec clip;
      std::filesystem::path p = entry.at("path").get<std::string>();
      clip.path = p.is_relative() ? base / p : p;
      clip.split = parse_split(entry.at("split").get<std::string>());
      clip.clip_id = entry.at("clip_id").get<std::string>();
      clips.push_back(std::move(clip));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kInvalidArgument, path.string() + ": bad entry: " + e.what());
    }
  }
  return clips;
}

json metadata(const Corpus& corpus) {
  json clips = json::array();
  for (const auto& c : corpus.clips) {
    clips.push_back({{"clip_id", c.clip_id},
                     {"split", to_string(c.split)},
                     {"path", c.path},
                     {"first_frame", c.first_frame},
                     {"frame_count", c.frame_count}});
  }
  return {
      {"format_version", kCorpusFormatVersion},
      {"fft_size", corpus.fft_size},
      {"hop", corpus.hop},
      {"sample_rate", corpus.sample_rate},
      {"bins", corpus.bins},
      {"frames", corpus.size()},
      {"augmentation", to_string(corpus.augmentation)},
      {"seed", corpus.seed},
      {"drop_silent", corpus.drop_silent},
      {"silent_frames", corpus.silent_count()},
      {"clips", clips},
  };
}

void save_corpus(const Corpus& corpus, std::ostream& out) {
  corpus.validate();
  const std::string text = metadata(corpus).dump();
  out.write(kMagic, 4);
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  io::put_array<float>(out, corpus.frames);
  io::put_array<float>(out, corpus.peaks);
  io::put_array<std::int8_t>(out, corpus.chroma_class);
  std::vector<std::uint8_t> splits(corpus.size());
  std::transform(corpus.splits.begin(), corpus.splits.end(), splits.begin(),
                 [](Split s) { return static_cast<std::uint8_t>(s); });
  io::put_array<std::uint8_t>(out, splits);
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  save_corpus(corpus, out);
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

Corpus load_corpus(const std::filesystem::path& path) {
  const std::string where = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + where);

  char magic[4];
  if (!in.read(magic, 4)) corrupt(where, "truncated header");
  if (!std::equal(magic, magic + 4, kMagic)) {
    if (std::equal(magic, magic + 3, kMagic)) {
      throw Error(ErrorKind::kUnsupportedVersion,
                  where + ": corpus format '" + std::string(magic, 4) + "' (supported: TCV1)");
    }
    corrupt(where, "not a TCV corpus file");
  }
  std::uint32_t length = 0;
  std::string text;
  if (!io::get(in, length) || !io::get_bytes(in, text, length)) corrupt(where, "truncated header");

  Corpus corpus;
  std::size_t m = 0;
  try {
    const json j = json::parse(text);
    const auto version = j.at("format_version").get<std::uint32_t>();
    if (version != kCorpusFormatVersion) {
      throw Error(ErrorKind::kUnsupportedVersion,
                  where + ": corpus format version " + std::to_string(version));
    }
    corpus.fft_size = j.at("fft_size").get<std::size_t>();
    corpus.hop = j.at("hop").get<std::size_t>();
    corpus.sample_rate = j.at("sample_rate").get<double>();
    corpus.bins = j.at("bins").get<std::size_t>();
    corpus.augmentation = parse_augmentation(j.at("augmentation").get<std::string>());
    corpus.seed = j.at("seed").get<std::uint64_t>();
    corpus.drop_silent = j.at("drop_silent").get<bool>();
    m = j.at("frames").get<std::size_t>();
    for (const auto& c : j.at("clips")) {
      corpus.clips.push_back({c.at("clip_id").get<std::string>(),
                              parse_split(c.at("split").get<std::string>()),
                              c.at("path").get<std::string>(),
                              c.at("first_frame").get<std::size_t>(),
                              c.at("frame_count").get<std::size_t>()});
    }
  } catch (const json::exception& e) {
    corrupt(where, std::string("bad metadata: ") + e.what());
  }
  if (corpus.fft_size != dsp::kFftSize || corpus.hop != dsp::kHop ||
      corpus.bins != dsp::kBins) {
    throw Error(ErrorKind::kUnsupportedVersion,
                where + ": only fft_size 4096 / hop 1024 corpora are supported");
  }

  corpus.frames.resize(m * corpus.bins);
  corpus.peaks.resize(m);
  corpus.chroma_class.resize(m);
  std::vector<std::uint8_t> splits(m);
  if (!io::get_array<float>(in, corpus.frames) || !io::get_array<float>(in, corpus.peaks) ||
      !io::get_array<std::int8_t>(in, corpus.chroma_class) ||
      !io::get_array<std::uint8_t>(in, splits)) {
    corrupt(where, "truncated frame data");
  }
  if (in.peek() != std::char_traits<char>::eof()) corrupt(where, "trailing bytes");
  corpus.splits.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (splits[i] > 2) corrupt(where, "bad split tag at frame " + std::to_string(i));
    corpus.splits[i] = static_cast<Split>(splits[i]);
  }
  corpus.clip_of_frame.assign(m, 0);
  for (std::size_t c = 0; c < corpus.clips.size(); ++c) {
    const auto& clip = corpus.clips[c];
    if (clip.first_frame + clip.frame_count > m) corrupt(where, "clip range out of bounds");
    std::fill_n(corpus.clip_of_frame.begin() + static_cast<std::ptrdiff_t>(clip.first_frame),
                clip.frame_count, static_cast<std::uint32_t>(c));
  }
  try {
    corpus.validate();
  } catch (const Error& e) {
    throw Error(e.kind(), where + ": " + e.what());
  }
  return corpus;
}

std::string corpus_hash(const Corpus& corpus) {
  std::ostringstream buffer;
  save_corpus(corpus, buffer);
  const std::string bytes = buffer.str();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

}  // namespace timbrelab::corpus
