// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// STFT analysis, per-frame normalization and noise-phase overlap-add
// resynthesis. Analysis and synthesis run in double precision; stored
// frames are 32-bit floats.

#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace timbrelab::dsp {

inline constexpr std::size_t kFftSize = 4096;
inline constexpr std::size_t kHop = 1024;
inline constexpr std::size_t kBins = kFftSize / 2 + 1;
inline constexpr double kSampleRate = 44100.0;

struct AudioBuffer {
  std::vector<float> samples;
  double sample_rate = kSampleRate;

  /// Throws kInvalidArgument on a non-positive rate or non-finite sample.
  void validate() const;
  double seconds() const { return samples.size() / sample_rate; }
};

/// One normalized magnitude frame: values in [0,1], max exactly 1 unless the
/// frame was silent (peak == 0, all zeros).
struct SpectralFrame {
  std::vector<float> magnitudes;
  float peak = 0.0f;

  bool silent() const { return peak == 0.0f; }
};

/// Row-major frames x kBins magnitude/phase pair produced by `stft`.
struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = kBins;
  std::vector<double> magnitudes;
  std::vector<double> phases;

  std::span<const double> magnitude(std::size_t frame) const {
    return {magnitudes.data() + frame * bins, bins};
  }
  std::span<const double> phase(std::size_t frame) const {
    return {phases.data() + frame * bins, bins};
  }
};

/// Phases of a seeded white-noise STFT, reused cyclically during inversion.
struct PhaseBank {
  std::size_t frames = 0;
  std::uint64_t seed = 0;
  std::vector<float> phases;  // frames x kBins, each in (-pi, pi]

  std::span<const float> frame(std::size_t index) const {
    const std::size_t row = index % frames;
    return {phases.data() + row * kBins, kBins};
  }
};

/// Real-input FFT of fixed size backed by FFTW. Each instance owns its plans
/// and aligned scratch; execute calls never allocate. Not thread-safe per
/// instance; use one per thread.
class RealFft {
 public:
  explicit RealFft(std::size_t size);
  ~RealFft();
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return size_; }

  /// Unnormalized forward transform, bins 0..size/2.
  void forward(std::span<const double> input,
               std::span<std::complex<double>> output);

  /// Inverse of `forward` including the 1/size factor. The input is treated
  /// as the non-redundant half of a conjugate-symmetric spectrum; imaginary
  /// parts at DC and Nyquist are ignored.
  void inverse(std::span<const std::complex<double>> input,
               std::span<double> output);

 private:
  struct Plans;
  std::size_t size_;
  std::unique_ptr<Plans> plans_;
};

/// Periodic Hann window: w[k] = 0.5 (1 - cos(2 pi k / n)).
std::vector<double> hann_window(std::size_t n);

/// Number of analysis frames for a signal of `length` samples (0 if shorter
/// than one frame). Frames start at sample 0; no padding.
std::size_t frame_count(std::size_t length, std::size_t fft_size = kFftSize,
                        std::size_t hop = kHop);

Spectrogram stft(const AudioBuffer& audio, std::size_t fft_size = kFftSize,
                 std::size_t hop = kHop);

SpectralFrame normalize_frame(std::span<const double> magnitudes);
SpectralFrame normalize_frame(std::span<const float> magnitudes);

PhaseBank noise_phase_bank(std::size_t num_frames, std::uint64_t seed);

/// Full 4096-bin conjugate-symmetric extension of a half spectrum. DC and
/// Nyquist are forced real.
std::vector<std::complex<double>> mirror_extend(
    std::span<const std::complex<double>> half);

/// Batch inversion: per frame gain * |X| * e^{i phase}, inverse FFT, Hann
/// synthesis window, overlap-add at kHop, divided by the summed squared
/// window (floored at 1e-12). The first and last kFftSize - kHop samples see
/// a partial envelope and are only exact for true phases.
AudioBuffer istft_overlap_add(std::span<const SpectralFrame> frames,
                              const PhaseBank& bank, double gain);

/// Same inversion with explicit per-frame phases (true-phase round trips).
/// `magnitudes` and `phases` are frames x kBins, row-major.
AudioBuffer istft_overlap_add(std::span<const double> magnitudes,
                              std::span<const double> phases,
                              std::size_t frames);

/// Incremental overlap-add for streaming synthesis. Each call consumes one
/// magnitude frame and emits the kHop samples that no later frame touches.
/// Output is divided by the steady-state squared-window sum (1.5 for a
/// periodic Hann at 75% overlap) so the stream fades in from silence instead
/// of amplifying the first partial-envelope hop.
class OverlapAddSynth {
 public:
  OverlapAddSynth();

  /// `out` must hold kHop samples. No allocation after construction.
  void render(std::span<const float> magnitudes, std::span<const float> phases,
              double scale, std::span<float> out);

  void reset();

  /// Samples still waiting on future frames (kFftSize - kHop of them).
  std::span<const double> tail() const {
    return std::span<const double>(pending_).first(kFftSize - kHop);
  }

 private:
  RealFft fft_;
  std::vector<double> window_;
  std::vector<std::complex<double>> spectrum_;
  std::vector<double> frame_;
  std::vector<double> pending_;
  double envelope_;
};

}  // namespace timbrelab::dsp
