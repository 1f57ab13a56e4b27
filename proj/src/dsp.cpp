// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "timbrelab/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <mutex>
#include <numbers>
#include <string>

#include "timbrelab/error.hpp"
#include "timbrelab/rng.hpp"

namespace timbrelab::dsp {
namespace {

// FFTW planner calls are not thread-safe; execution with the new-array
// interface is.
std::mutex& planner_mutex() {
  static std::mutex mutex;
  return mutex;
}

constexpr double kEnvelopeFloor = 1e-12;

double wrap_phase(double angle) {
  // atan2 yields [-pi, pi]; -pi only for a negative real with -0.0 imag.
  return angle <= -std::numbers::pi ? std::numbers::pi : angle;
}

void overlap_add_frames(std::span<const double> magnitudes, std::size_t frames,
                        double gain,
                        const std::function<std::span<const double>(std::size_t)>&
                            phase_of,
                        std::vector<float>& out) {
  const auto window = hann_window(kFftSize);
  const std::size_t length = kFftSize + (frames - 1) * kHop;
  std::vector<double> accum(length, 0.0);
  std::vector<double> envelope(length, 0.0);
  std::vector<std::complex<double>> spectrum(kBins);
  std::vector<double> frame(kFftSize);
  RealFft fft(kFftSize);

  for (std::size_t f = 0; f < frames; ++f) {
    const auto mags = magnitudes.subspan(f * kBins, kBins);
    const auto phases = phase_of(f);
    for (std::size_t k = 0; k < kBins; ++k) {
      const double m = gain * mags[k];
      spectrum[k] = {m * std::cos(phases[k]), m * std::sin(phases[k])};
    }
    fft.inverse(spectrum, frame);
    const std::size_t start = f * kHop;
    for (std::size_t n = 0; n < kFftSize; ++n) {
      accum[start + n] += frame[n] * window[n];
      envelope[start + n] += window[n] * window[n];
    }
  }

  out.resize(length);
  for (std::size_t n = 0; n < length; ++n) {
    out[n] = static_cast<float>(accum[n] / std::max(envelope[n], kEnvelopeFloor));
  }
}

}  // namespace

void AudioBuffer::validate() const {
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) {
    throw Error(ErrorKind::kInvalidArgument,
                "sample rate must be positive, got " + std::to_string(sample_rate));
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i])) {
      throw Error(ErrorKind::kInvalidArgument,
                  "non-finite sample at index " + std::to_string(i));
    }
  }
}

struct RealFft::Plans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
  double* real = nullptr;
  fftw_complex* complex = nullptr;

  ~Plans() {
    std::lock_guard lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (inverse) fftw_destroy_plan(inverse);
    fftw_free(real);
    fftw_free(complex);
  }
};

RealFft::RealFft(std::size_t size) : size_(size), plans_(std::make_unique<Plans>()) {
  if (size < 2 || size % 2 != 0) {
    throw Error(ErrorKind::kInvalidArgument,
                "FFT size must be even and >= 2, got " + std::to_string(size));
  }
  const int n = static_cast<int>(size);
  plans_->real = fftw_alloc_real(size);
  plans_->complex = fftw_alloc_complex(size / 2 + 1);
  // FFTW_ESTIMATE keeps the chosen algorithm, and so the rounding, identical
  // from run to run.
  std::lock_guard lock(planner_mutex());
  plans_->forward = fftw_plan_dft_r2c_1d(n, plans_->real, plans_->complex,
                                         FFTW_ESTIMATE | FFTW_DESTROY_INPUT);
  plans_->inverse = fftw_plan_dft_c2r_1d(n, plans_->complex, plans_->real,
                                         FFTW_ESTIMATE | FFTW_DESTROY_INPUT);
}

RealFft::~RealFft() = default;
RealFft::RealFft(RealFft&&) noexcept = default;
RealFft& RealFft::operator=(RealFft&&) noexcept = default;

void RealFft::forward(std::span<const double> input,
                      std::span<std::complex<double>> output) {
  std::copy(input.begin(), input.end(), plans_->real);
  fftw_execute(plans_->forward);
  const std::size_t bins = size_ / 2 + 1;
  for (std::size_t k = 0; k < bins; ++k) {
    output[k] = {plans_->complex[k][0], plans_->complex[k][1]};
  }
}

void RealFft::inverse(std::span<const std::complex<double>> input,
                      std::span<double> output) {
  const std::size_t bins = size_ / 2 + 1;
  for (std::size_t k = 0; k < bins; ++k) {
    plans_->complex[k][0] = input[k].real();
    plans_->complex[k][1] = input[k].imag();
  }
  plans_->complex[0][1] = 0.0;
  plans_->complex[bins - 1][1] = 0.0;
  fftw_execute(plans_->inverse);
  const double scale = 1.0 / static_cast<double>(size_);
  for (std::size_t n = 0; n < size_; ++n) output[n] = plans_->real[n] * scale;
}

std::vector<double> hann_window(std::size_t n) {
  if (n < 2) {
    throw Error(ErrorKind::kInvalidArgument,
                "window length must be >= 2, got " + std::to_string(n));
  }
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    w[k] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * k / n));
  }
  // Pin the exact center value; cos(pi) rounding leaves 1 - 1e-16 otherwise.
  if (n % 2 == 0) w[n / 2] = 1.0;
  return w;
}

std::size_t frame_count(std::size_t length, std::size_t fft_size,
                        std::size_t hop) {
  if (length < fft_size) return 0;
  return (length - fft_size) / hop + 1;
}

Spectrogram stft(const AudioBuffer& audio, std::size_t fft_size,
                 std::size_t hop) {
  audio.validate();
  if (hop == 0) throw Error(ErrorKind::kInvalidArgument, "hop must be > 0");
  const std::size_t frames = frame_count(audio.samples.size(), fft_size, hop);
  if (frames == 0) {
    throw Error(ErrorKind::kEmptyCorpus,
                "audio has " + std::to_string(audio.samples.size()) +
                    " samples, fewer than one " + std::to_string(fft_size) +
                    "-sample frame");
  }

  const auto window = hann_window(fft_size);
  const std::size_t bins = fft_size / 2 + 1;
  Spectrogram out;
  out.frames = frames;
  out.bins = bins;
  out.magnitudes.resize(frames * bins);
  out.phases.resize(frames * bins);

  RealFft fft(fft_size);
  std::vector<double> segment(fft_size);
  std::vector<std::complex<double>> spectrum(bins);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t start = f * hop;
    for (std::size_t n = 0; n < fft_size; ++n) {
      segment[n] = audio.samples[start + n] * window[n];
    }
    fft.forward(segment, spectrum);
    for (std::size_t k = 0; k < bins; ++k) {
      out.magnitudes[f * bins + k] = std::abs(spectrum[k]);
      out.phases[f * bins + k] = wrap_phase(std::arg(spectrum[k]));
    }
  }
  return out;
}

namespace {

template <typename T>
SpectralFrame normalize_impl(std::span<const T> magnitudes) {
  double peak = 0.0;
  for (std::size_t k = 0; k < magnitudes.size(); ++k) {
    const double m = magnitudes[k];
    if (!std::isfinite(m) || m < 0.0) {
      throw Error(ErrorKind::kInvalidFrame,
                  "magnitude at bin " + std::to_string(k) +
                      " is negative or non-finite");
    }
    peak = std::max(peak, m);
  }
  SpectralFrame frame;
  frame.magnitudes.assign(magnitudes.size(), 0.0f);
  frame.peak = static_cast<float>(peak);
  if (peak > 0.0) {
    for (std::size_t k = 0; k < magnitudes.size(); ++k) {
      frame.magnitudes[k] = static_cast<float>(magnitudes[k] / peak);
    }
  }
  return frame;
}

}  // namespace

SpectralFrame normalize_frame(std::span<const double> magnitudes) {
  return normalize_impl(magnitudes);
}

SpectralFrame normalize_frame(std::span<const float> magnitudes) {
  return normalize_impl(magnitudes);
}

PhaseBank noise_phase_bank(std::size_t num_frames, std::uint64_t seed) {
  if (num_frames < 1) {
    throw Error(ErrorKind::kInvalidArgument, "phase bank needs at least one frame");
  }
  Xorshift64Star rng(seed);
  AudioBuffer noise;
  noise.samples.resize(kFftSize + (num_frames - 1) * kHop);
  for (auto& s : noise.samples) s = static_cast<float>(rng.uniform(-1.0, 1.0));

  const auto spec = stft(noise);
  PhaseBank bank;
  bank.frames = num_frames;
  bank.seed = seed;
  bank.phases.resize(spec.phases.size());
  for (std::size_t i = 0; i < spec.phases.size(); ++i) {
    // Rounding to float can push a value just under pi up to pi, never past.
    bank.phases[i] = static_cast<float>(spec.phases[i]);
    if (bank.phases[i] <= -std::numbers::pi_v<float>) {
      bank.phases[i] = std::numbers::pi_v<float>;
    }
  }
  return bank;
}

std::vector<std::complex<double>> mirror_extend(
    std::span<const std::complex<double>> half) {
  const std::size_t n = (half.size() - 1) * 2;
  std::vector<std::complex<double>> full(n);
  full[0] = half[0].real();
  full[n / 2] = half[n / 2].real();
  for (std::size_t k = 1; k < n / 2; ++k) {
    full[k] = half[k];
    full[n - k] = std::conj(half[k]);
  }
  return full;
}

AudioBuffer istft_overlap_add(std::span<const SpectralFrame> frames,
                              const PhaseBank& bank, double gain) {
  if (frames.empty()) {
    throw Error(ErrorKind::kInvalidFrame, "no frames to invert");
  }
  if (bank.frames == 0) {
    throw Error(ErrorKind::kInvalidArgument, "phase bank is empty");
  }
  std::vector<double> mags(frames.size() * kBins);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (frames[f].magnitudes.size() != kBins) {
      throw Error(ErrorKind::kInvalidFrame,
                  "frame " + std::to_string(f) + " has " +
                      std::to_string(frames[f].magnitudes.size()) +
                      " bins, expected " + std::to_string(kBins));
    }
    std::copy(frames[f].magnitudes.begin(), frames[f].magnitudes.end(),
              mags.begin() + f * kBins);
  }
  std::vector<double> phase_row(kBins);
  AudioBuffer out;
  overlap_add_frames(
      mags, frames.size(), gain,
      [&](std::size_t f) -> std::span<const double> {
        const auto row = bank.frame(f);
        std::copy(row.begin(), row.end(), phase_row.begin());
        return phase_row;
      },
      out.samples);
  return out;
}

AudioBuffer istft_overlap_add(std::span<const double> magnitudes,
                              std::span<const double> phases,
                              std::size_t frames) {
  if (frames == 0 || magnitudes.size() != frames * kBins ||
      phases.size() != frames * kBins) {
    throw Error(ErrorKind::kInvalidFrame,
                "magnitude/phase arrays must both hold frames x 2049 values");
  }
  AudioBuffer out;
  overlap_add_frames(
      magnitudes, frames, 1.0,
      [&](std::size_t f) { return phases.subspan(f * kBins, kBins); },
      out.samples);
  return out;
}

OverlapAddSynth::OverlapAddSynth()
    : fft_(kFftSize),
      window_(hann_window(kFftSize)),
      spectrum_(kBins),
      frame_(kFftSize),
      pending_(kFftSize, 0.0),
      envelope_(0.0) {
  // Sum over all overlapping frames at one sample position.
  for (std::size_t offset = 0; offset < kFftSize; offset += kHop) {
    envelope_ += window_[offset + kHop / 2] * window_[offset + kHop / 2];
  }
}

void OverlapAddSynth::reset() { std::fill(pending_.begin(), pending_.end(), 0.0); }

void OverlapAddSynth::render(std::span<const float> magnitudes,
                             std::span<const float> phases, double scale,
                             std::span<float> out) {
  for (std::size_t k = 0; k < kBins; ++k) {
    const double m = scale * magnitudes[k];
    const double phi = phases[k];
    spectrum_[k] = {m * std::cos(phi), m * std::sin(phi)};
  }
  fft_.inverse(spectrum_, frame_);
  for (std::size_t n = 0; n < kFftSize; ++n) pending_[n] += frame_[n] * window_[n];
  for (std::size_t n = 0; n < kHop; ++n) {
    out[n] = static_cast<float>(pending_[n] / envelope_);
  }
  std::copy(pending_.begin() + kHop, pending_.end(), pending_.begin());
  std::fill(pending_.end() - kHop, pending_.end(), 0.0);
}

}  // namespace timbrelab::dsp
