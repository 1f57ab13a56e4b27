// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Frame-level chromagram and one-hot chroma labels. Pitch classes are
// ordered C, C#, D, ..., B (A = 9).

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "timbrelab/dsp.hpp"

namespace timbrelab::chroma {

inline constexpr std::size_t kClasses = 12;
inline constexpr std::size_t kNotes = 88;  // A0 .. C8
inline constexpr int kClassA = 9;

inline constexpr std::array<std::string_view, kClasses> kClassNames = {
    "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"};

struct Chromagram {
  std::array<double, kClasses> energies{};
};

/// One-hot pitch class, or all zeros for a silent frame.
struct ChromaVector {
  std::array<float, kClasses> onehot{};
  std::optional<int> class_index;

  bool silent() const { return !class_index.has_value(); }

  static ChromaVector of_class(int pitch_class);
  static ChromaVector silence() { return {}; }
};

/// Equal-tempered A0..C8: f[k] = 27.5 * 2^(k/12).
std::array<double, kNotes> note_frequencies();

/// Pitch class of piano key `note` (0 = A0).
constexpr int note_pitch_class(int note) { return (note + kClassA) % 12; }

/// Piano key whose [-50, +50) cent band contains `hz`, if any.
std::optional<int> note_for_frequency(double hz);

/// Note index per FFT bin (-1 where the bin center lies outside every band).
std::vector<int> bin_note_table(double sample_rate = dsp::kSampleRate,
                                std::size_t fft_size = dsp::kFftSize);

/// Sums magnitude^2 over the bins of each note band, then folds the 88 notes
/// into 12 pitch classes.
Chromagram frame_chromagram(std::span<const float> frame,
                            double sample_rate = dsp::kSampleRate,
                            std::size_t fft_size = dsp::kFftSize);
Chromagram frame_chromagram(std::span<const double> frame,
                            double sample_rate = dsp::kSampleRate,
                            std::size_t fft_size = dsp::kFftSize);

/// Argmax class, lowest index on ties; an all-zero chromagram is silent.
ChromaVector one_hot_chroma(const Chromagram& chromagram);

/// frame_chromagram followed by one_hot_chroma.
ChromaVector classify(std::span<const float> frame);

/// CSV dump of the bin -> note assignment: bin,hz,note,note_hz,class,name.
void write_bin_note_csv(std::ostream& out, double sample_rate = dsp::kSampleRate,
                        std::size_t fft_size = dsp::kFftSize);

}  // namespace timbrelab::chroma
