// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "timbrelab/chroma.hpp"

#include <cmath>
#include <string>

#include "timbrelab/error.hpp"

namespace timbrelab::chroma {
namespace {

constexpr double kA0 = 27.5;

const std::vector<int>& default_table() {
  static const std::vector<int> table = bin_note_table(dsp::kSampleRate, dsp::kFftSize);
  return table;
}

template <typename T>
Chromagram chromagram_impl(std::span<const T> frame, double sample_rate,
                           std::size_t fft_size) {
  if (frame.size() != fft_size / 2 + 1) {
    throw Error(ErrorKind::kInvalidFrame,
                "chromagram expects " + std::to_string(fft_size / 2 + 1) +
                    " bins, got " + std::to_string(frame.size()));
  }
  std::vector<int> local;
  const std::vector<int>* table = &default_table();
  if (sample_rate != dsp::kSampleRate || fft_size != dsp::kFftSize) {
    local = bin_note_table(sample_rate, fft_size);
    table = &local;
  }
  Chromagram out;
  for (std::size_t k = 0; k < frame.size(); ++k) {
    const int note = (*table)[k];
    if (note < 0) continue;
    const double m = frame[k];
    out.energies[note_pitch_class(note)] += m * m;
  }
  return out;
}

}  // namespace

ChromaVector ChromaVector::of_class(int pitch_class) {
  if (pitch_class < 0 || pitch_class >= static_cast<int>(kClasses)) {
    throw Error(ErrorKind::kInvalidArgument,
                "pitch class must be 0-11, got " + std::to_string(pitch_class));
  }
  ChromaVector v;
  v.onehot[pitch_class] = 1.0f;
  v.class_index = pitch_class;
  return v;
}

std::array<double, kNotes> note_frequencies() {
  std::array<double, kNotes> f{};
  for (std::size_t k = 0; k < kNotes; ++k) f[k] = kA0 * std::exp2(k / 12.0);
  return f;
}

std::optional<int> note_for_frequency(double hz) {
  if (!(hz > 0.0)) return std::nullopt;
  const double semitones = 12.0 * std::log2(hz / kA0);
  const auto note = static_cast<long>(std::floor(semitones + 0.5));
  if (note < 0 || note >= static_cast<long>(kNotes)) return std::nullopt;
  return static_cast<int>(note);
}

std::vector<int> bin_note_table(double sample_rate, std::size_t fft_size) {
  std::vector<int> table(fft_size / 2 + 1, -1);
  for (std::size_t k = 0; k < table.size(); ++k) {
    const auto note = note_for_frequency(k * sample_rate / fft_size);
    if (note) table[k] = *note;
  }
  return table;
}

Chromagram frame_chromagram(std::span<const float> frame, double sample_rate,
                            std::size_t fft_size) {
  return chromagram_impl(frame, sample_rate, fft_size);
}

Chromagram frame_chromagram(std::span<const double> frame, double sample_rate,
                            std::size_t fft_size) {
  return chromagram_impl(frame, sample_rate, fft_size);
}

ChromaVector one_hot_chroma(const Chromagram& chromagram) {
  int best = -1;
  double best_energy = 0.0;
  for (std::size_t c = 0; c < kClasses; ++c) {
    if (chromagram.energies[c] > best_energy) {
      best_energy = chromagram.energies[c];
      best = static_cast<int>(c);
    }
  }
  return best < 0 ? ChromaVector::silence() : ChromaVector::of_class(best);
}

ChromaVector classify(std::span<const float> frame) {
  return one_hot_chroma(frame_chromagram(frame));
}

void write_bin_note_csv(std::ostream& out, double sample_rate, std::size_t fft_size) {
  const auto table = bin_note_table(sample_rate, fft_size);
  const auto notes = note_frequencies();
  out << "bin,hz,note,note_hz,class,name\n";
  for (std::size_t k = 0; k < table.size(); ++k) {
    out << k << ',' << k * sample_rate / fft_size << ',';
    if (table[k] < 0) {
      out << ",,,\n";
      continue;
    }
    const int cls = note_pitch_class(table[k]);
    out << table[k] << ',' << notes[table[k]] << ',' << cls << ','
        << kClassNames[cls] << '\n';
  }
}

}  // namespace timbrelab::chroma
