// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "support/oracles.hpp"
#include "timbrelab/chroma.hpp"
#include "timbrelab/dsp.hpp"
#include "timbrelab/error.hpp"
#include "timbrelab/rng.hpp"

using namespace timbrelab;
using namespace timbrelab::dsp;

namespace {

AudioBuffer random_audio(std::size_t length, std::uint64_t seed) {
  Xorshift64Star rng(seed);
  AudioBuffer audio;
  audio.samples.resize(length);
  for (auto& s : audio.samples) s = static_cast<float>(rng.uniform(-1.0, 1.0));
  return audio;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::kIo;
}

}  // namespace

TEST_CASE("hann window closed forms") {
  const auto w4 = hann_window(4);
  REQUIRE(w4.size() == 4);
  CHECK(w4[0] == 0.0);
  CHECK(w4[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(w4[2] == 1.0);
  CHECK(w4[3] == doctest::Approx(0.5).epsilon(1e-15));

  const auto w2 = hann_window(2);
  CHECK(w2[0] == 0.0);
  CHECK(w2[1] == 1.0);

  const auto w = hann_window(4096);
  CHECK(w[2048] == 1.0);
  CHECK(std::all_of(w.begin(), w.end(), [](double v) { return v >= 0.0 && v <= 1.0; }));

  CHECK(kind_of([] { hann_window(1); }) == ErrorKind::kInvalidArgument);
  CHECK(kind_of([] { hann_window(0); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("stft frame counts") {
  AudioBuffer second;
  second.samples.assign(44100, 0.0f);
  CHECK(stft(second).frames == 40);

  AudioBuffer one;
  one.samples.assign(4096, 0.0f);
  CHECK(stft(one).frames == 1);

  AudioBuffer short_clip;
  short_clip.samples.assign(4095, 0.0f);
  CHECK(kind_of([&] { stft(short_clip); }) == ErrorKind::kEmptyCorpus);

  AudioBuffer bad;
  bad.samples.assign(5000, 0.0f);
  bad.samples[17] = std::nanf("");
  CHECK(kind_of([&] { stft(bad); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("frame count formula holds for random lengths") {
  Xorshift64Star rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t length = 4096 + rng.below(30000);
    AudioBuffer audio;
    audio.samples.assign(length, 0.25f);
    CHECK(stft(audio).frames == (length - 4096) / 1024 + 1);
    CHECK(frame_count(length) == (length - 4096) / 1024 + 1);
  }
}

TEST_CASE("stft magnitudes match direct DFT of a windowed 1 kHz sine") {
  AudioBuffer audio;
  audio.samples = testing::sine(1000.0, 4096);
  const auto spec = stft(audio);
  const auto mags = spec.magnitude(0);
  const auto peak = std::max_element(mags.begin(), mags.end()) - mags.begin();
  CHECK(peak == 93);

  for (std::size_t k : {0u, 1u, 90u, 92u, 93u, 94u, 300u, 2048u}) {
    const double oracle = testing::direct_dft_magnitude(audio.samples, k);
    CHECK(mags[k] == doctest::Approx(oracle).epsilon(1e-9).scale(1024.0));
  }
}

TEST_CASE("normalize_frame") {
  std::vector<double> ramp(kBins, 0.0);
  ramp[1] = 2.0;
  ramp[2] = 4.0;
  auto frame = normalize_frame(std::span<const double>(ramp));
  CHECK(frame.peak == 4.0f);
  CHECK(frame.magnitudes[0] == 0.0f);
  CHECK(frame.magnitudes[1] == 0.5f);
  CHECK(frame.magnitudes[2] == 1.0f);
  CHECK(frame.magnitudes.size() == kBins);

  const std::vector<double> zeros(kBins, 0.0);
  auto silent = normalize_frame(std::span<const double>(zeros));
  CHECK(silent.peak == 0.0f);
  CHECK(silent.silent());
  CHECK(std::all_of(silent.magnitudes.begin(), silent.magnitudes.end(),
                    [](float v) { return v == 0.0f; }));

  auto again = normalize_frame(std::span<const float>(frame.magnitudes));
  CHECK(again.peak == 1.0f);
  CHECK(again.magnitudes == frame.magnitudes);

  std::vector<double> negative(kBins, 0.1);
  negative[5] = -0.1;
  CHECK(kind_of([&] { normalize_frame(std::span<const double>(negative)); }) ==
        ErrorKind::kInvalidFrame);
  std::vector<double> inf(kBins, 0.1);
  inf[9] = INFINITY;
  CHECK(kind_of([&] { normalize_frame(std::span<const double>(inf)); }) ==
        ErrorKind::kInvalidFrame);
}

TEST_CASE("normalize_frame is idempotent and scale invariant") {
  Xorshift64Star rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(kBins);
    for (auto& v : x) v = rng.uniform(0.0, 50.0);
    const auto base = normalize_frame(std::span<const double>(x));
    CHECK(*std::max_element(base.magnitudes.begin(), base.magnitudes.end()) == 1.0f);

    const auto twice = normalize_frame(std::span<const float>(base.magnitudes));
    CHECK(twice.magnitudes == base.magnitudes);

    // Power-of-two scales are exact in floating point, so equality is exact.
    const double pow2 = std::exp2(static_cast<int>(rng.below(20)) - 10);
    std::vector<double> scaled(x);
    for (auto& v : scaled) v *= pow2;
    CHECK(normalize_frame(std::span<const double>(scaled)).magnitudes == base.magnitudes);

    const double c = rng.uniform(1e-3, 1e3);
    for (std::size_t k = 0; k < kBins; ++k) scaled[k] = x[k] * c;
    const auto general = normalize_frame(std::span<const double>(scaled));
    for (std::size_t k = 0; k < kBins; ++k) {
      CHECK(general.magnitudes[k] == doctest::Approx(base.magnitudes[k]).epsilon(1e-6));
    }
  }
}

TEST_CASE("noise phase bank") {
  const auto a = noise_phase_bank(1, 42);
  const auto b = noise_phase_bank(1, 42);
  CHECK(a.phases == b.phases);
  CHECK(a.frames == 1);
  CHECK(a.seed == 42);
  CHECK(a.phases.size() == kBins);

  const auto s1 = noise_phase_bank(10, 1);
  const auto s2 = noise_phase_bank(10, 2);
  CHECK(s1.phases != s2.phases);

  const auto big = noise_phase_bank(64, 5);
  for (float phi : big.phases) {
    REQUIRE(phi > -std::numbers::pi_v<float>);
    REQUIRE(phi <= std::numbers::pi_v<float>);
  }
  // Cyclic reuse.
  CHECK(std::equal(big.frame(3).begin(), big.frame(3).end(), big.frame(67).begin()));
}

TEST_CASE("istft basic contracts") {
  const auto bank = noise_phase_bank(4, 3);
  std::vector<SpectralFrame> zeros(5, SpectralFrame{std::vector<float>(kBins, 0.0f), 0.0f});
  const auto silent = istft_overlap_add(zeros, bank, 1.0);
  CHECK(silent.samples.size() == 4096 + 4 * 1024);
  CHECK(std::all_of(silent.samples.begin(), silent.samples.end(),
                    [](float v) { return v == 0.0f; }));

  std::vector<SpectralFrame> one(1, SpectralFrame{std::vector<float>(kBins, 0.5f), 1.0f});
  CHECK(istft_overlap_add(one, bank, 1.0).samples.size() == 4096);

  std::vector<SpectralFrame> wrong(1, SpectralFrame{std::vector<float>(2048, 0.5f), 1.0f});
  CHECK(kind_of([&] { istft_overlap_add(wrong, bank, 1.0); }) == ErrorKind::kInvalidFrame);
}

TEST_CASE("true-phase round trip reconstructs interior samples") {
  Xorshift64Star rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    const auto audio = random_audio(4096 * 3 + rng.below(20000), rng.next());
    const auto spec = stft(audio);
    const auto back = istft_overlap_add(spec.magnitudes, spec.phases, spec.frames);
    REQUIRE(back.samples.size() == 4096 + (spec.frames - 1) * 1024);
    double err = 0.0, ref = 0.0;
    for (std::size_t n = 4096; n + 4096 < back.samples.size(); ++n) {
      const double d = back.samples[n] - audio.samples[n];
      err += d * d;
      ref += static_cast<double>(audio.samples[n]) * audio.samples[n];
    }
    CHECK(std::sqrt(err / ref) < 1e-6);
  }
}

TEST_CASE("conjugate-symmetric extension inverts to a real signal") {
  const auto bank = noise_phase_bank(1, 8);
  Xorshift64Star rng(4);
  std::vector<std::complex<double>> half(kBins);
  double peak = 0.0;
  for (std::size_t k = 0; k < kBins; ++k) {
    const double m = rng.uniform(0.0, 1.0);
    half[k] = std::polar(m, static_cast<double>(bank.frame(0)[k]));
  }
  const auto full = mirror_extend(half);
  REQUIRE(full.size() == kFftSize);
  const auto time = testing::direct_inverse_dft(full);
  double max_imag = 0.0;
  for (const auto& v : time) {
    peak = std::max(peak, std::abs(v.real()));
    max_imag = std::max(max_imag, std::abs(v.imag()));
  }
  CHECK(max_imag < 1e-9 * peak);

  // The c2r path used for synthesis agrees with the explicit extension.
  RealFft fft(kFftSize);
  std::vector<double> fast(kFftSize);
  fft.inverse(half, fast);
  for (std::size_t n = 0; n < kFftSize; ++n) {
    CHECK(fast[n] == doctest::Approx(time[n].real()).epsilon(1e-9).scale(peak));
  }
}

TEST_CASE("noise-phase resynthesis of a 440 Hz tone keeps pitch class A") {
  AudioBuffer tone;
  tone.samples = testing::sine(440.0, 44100, 0.8);
  const auto spec = stft(tone);
  std::vector<SpectralFrame> frames;
  for (std::size_t f = 0; f < spec.frames; ++f) {
    frames.push_back(normalize_frame(spec.magnitude(f)));
  }
  const auto bank = noise_phase_bank(8, 2024);
  const auto out = istft_overlap_add(frames, bank, 500.0);

  // Classify the interior of the output with the brute-force chroma oracle.
  AudioBuffer interior;
  interior.samples.assign(out.samples.begin() + 4096, out.samples.end() - 4096);
  const auto resynth = stft(interior);
  std::vector<double> total(12, 0.0);
  for (std::size_t f = 0; f < resynth.frames; ++f) {
    const auto m = resynth.magnitude(f);
    const std::vector<float> row(m.begin(), m.end());
    const auto e = testing::brute_force_chromagram(row);
    for (int c = 0; c < 12; ++c) total[c] += e[c];
  }
  CHECK(testing::argmax(total) == 9);
}

TEST_CASE("streaming overlap-add matches batch inversion at steady state") {
  const auto bank = noise_phase_bank(16, 77);
  Xorshift64Star rng(5);
  std::vector<SpectralFrame> frames;
  for (int f = 0; f < 12; ++f) {
    std::vector<double> mags(kBins);
    for (auto& m : mags) m = rng.uniform(0.0, 1.0);
    frames.push_back(normalize_frame(std::span<const double>(mags)));
  }
  const auto batch = istft_overlap_add(frames, bank, 1.0);

  OverlapAddSynth synth;
  std::vector<float> stream;
  std::vector<float> hop(kHop);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    synth.render(frames[f].magnitudes, bank.frame(f), 1.0, hop);
    stream.insert(stream.end(), hop.begin(), hop.end());
  }
  CHECK(synth.tail().size() == kFftSize - kHop);
  // From the fourth hop on, every sample sees all four overlapping windows.
  for (std::size_t n = 3 * kHop; n < stream.size(); ++n) {
    CHECK(stream[n] == doctest::Approx(batch.samples[n]).epsilon(1e-5).scale(1e-3));
  }
}
