// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Brute-force reference computations. These deliberately avoid the library's
// FFT and lookup-table paths so they can check them.

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

namespace timbrelab::testing {

inline std::vector<float> sine(double hz, std::size_t length, double amplitude = 1.0,
                               double sample_rate = 44100.0) {
  std::vector<float> x(length);
  for (std::size_t n = 0; n < length; ++n) {
    x[n] = static_cast<float>(amplitude *
                              std::sin(2.0 * std::numbers::pi * hz * n / sample_rate));
  }
  return x;
}

/// |X[k]| of a periodic-Hann-windowed segment by direct summation.
inline double direct_dft_magnitude(std::span<const float> segment, std::size_t k) {
  const std::size_t n_total = segment.size();
  std::complex<double> acc = 0.0;
  for (std::size_t n = 0; n < n_total; ++n) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / n_total);
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k * n % n_total) /
                         n_total;
    acc += segment[n] * w * std::complex<double>(std::cos(angle), std::sin(angle));
  }
  return std::abs(acc);
}

/// Full complex inverse DFT with 1/N scaling, by direct summation.
inline std::vector<std::complex<double>> direct_inverse_dft(
    std::span<const std::complex<double>> spectrum) {
  const std::size_t n_total = spectrum.size();
  std::vector<std::complex<double>> out(n_total);
  for (std::size_t n = 0; n < n_total; ++n) {
    std::complex<double> acc = 0.0;
    for (std::size_t k = 0; k < n_total; ++k) {
      const double angle =
          2.0 * std::numbers::pi * static_cast<double>(k * n % n_total) / n_total;
      acc += spectrum[k] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    out[n] = acc / static_cast<double>(n_total);
  }
  return out;
}

/// Brute-force chromagram: every bin scans all 88 keys for a [-50, +50) cent
/// match; energies are magnitude^2 folded onto C..B.
inline std::vector<double> brute_force_chromagram(std::span<const float> frame,
                                                  double sample_rate = 44100.0,
                                                  std::size_t fft_size = 4096) {
  std::vector<double> energies(12, 0.0);
  for (std::size_t k = 1; k < frame.size(); ++k) {
    const double hz = k * sample_rate / fft_size;
    for (int note = 0; note < 88; ++note) {
      const double cents = 1200.0 * std::log2(hz / (27.5 * std::exp2(note / 12.0)));
      if (cents >= -50.0 && cents < 50.0) {
        energies[(note + 9) % 12] += static_cast<double>(frame[k]) * frame[k];
        break;
      }
    }
  }
  return energies;
}

inline std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace timbrelab::testing
