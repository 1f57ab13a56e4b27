// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "timbrelab/tones.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "timbrelab/error.hpp"
#include "timbrelab/rng.hpp"
#include "timbrelab/wav.hpp"

namespace timbrelab::tones {

std::vector<Timbre> default_timbres() {
  std::vector<Timbre> out;
  Timbre saw{"saw", {}}, odd{"odd", {}}, mellow{"mellow", {}}, bright{"bright", {}};
  for (int n = 1; n <= 12; ++n) {
    saw.partials.push_back(1.0 / n);
    odd.partials.push_back(n % 2 == 1 ? 1.0 / n : 0.0);
    mellow.partials.push_back(1.0 / (n * n));
    // Weak fundamental, strong 2nd-4th partials.
    bright.partials.push_back(n == 1 ? 0.6 : (n <= 4 ? 0.8 : 0.9 / n));
  }
  out.push_back(std::move(saw));
  out.push_back(std::move(odd));
  out.push_back(std::move(mellow));
  out.push_back(std::move(bright));
  return out;
}

std::vector<int> c_major_octave() { return {60, 62, 64, 65, 67, 69, 71}; }

double midi_to_hz(int midi) { return 440.0 * std::pow(2.0, (midi - 69) / 12.0); }

dsp::AudioBuffer render_tone(double f0, const Timbre& timbre, std::size_t samples,
                             std::uint64_t seed, const ToneOptions& options) {
  Xorshift64Star rng(seed);
  const double sr = dsp::kSampleRate;
  const double two_pi = 2.0 * std::numbers::pi;
  const double vibrato_rate = 4.0 + rng.uniform(0.0, 2.0);
  const double vibrato_phase = rng.uniform(0.0, two_pi);
  std::vector<double> phase(timbre.partials.size());
  for (auto& p : phase) p = rng.uniform(0.0, two_pi);

  double norm = 0.0;
  for (double a : timbre.partials) norm += a;

  dsp::AudioBuffer out;
  out.samples.resize(samples);
  const double attack = 0.05 * sr;
  for (std::size_t i = 0; i < samples; ++i) {
    const double t = i / sr;
    const double env = std::min(1.0, i / attack) * std::exp(-0.8 * t);
    const double cents = options.vibrato_cents * std::sin(two_pi * vibrato_rate * t + vibrato_phase);
    const double f = f0 * std::pow(2.0, cents / 1200.0);
    double s = 0.0;
    for (std::size_t n = 0; n < timbre.partials.size(); ++n) {
      const double fn = f * static_cast<double>(n + 1);
      if (fn >= 0.45 * sr) break;
      phase[n] += two_pi * fn / sr;
      s += timbre.partials[n] * std::sin(phase[n]);
    }
    s = 0.7 * env * s / norm + options.noise_level * rng.uniform(-1.0, 1.0);
    out.samples[i] = static_cast<float>(s);
  }
  return out;
}

std::vector<corpus::ClipAudio> synthetic_clips(const ToneOptions& options) {
  const auto timbres = default_timbres();
  const auto notes = c_major_octave();
  const std::size_t samples = dsp::kFftSize + (options.frames_per_clip - 1) * dsp::kHop;
  std::vector<corpus::ClipAudio> clips;
  for (std::size_t n = 0; n < notes.size(); ++n) {
    for (std::size_t t = 0; t < timbres.size(); ++t) {
      for (std::size_t take = 0; take < 2; ++take) {
        corpus::ClipAudio clip;
        const std::size_t k = (n + t) % 4;
        clip.spec.split = take == 0 ? corpus::Split::kTrain
                        : k == 0    ? corpus::Split::kValidation
                        : k == 1    ? corpus::Split::kTest
                                    : corpus::Split::kTrain;
        clip.spec.clip_id = "n" + std::to_string(notes[n]) + "_" + timbres[t].name + "_" +
                            std::to_string(take);
        clip.spec.path = clip.spec.clip_id + ".wav";
        const std::uint64_t seed = options.seed * 1000003ULL + n * 31 + t * 7 + take;
        clip.audio = render_tone(midi_to_hz(notes[n]), timbres[t], samples, seed, options);
        clips.push_back(std::move(clip));
      }
    }
  }
  return clips;
}

std::filesystem::path write_demo_clips(const std::filesystem::path& dir,
                                       const ToneOptions& options) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& clip : synthetic_clips(options)) {
    wav::write(dir / clip.spec.path, clip.audio);
    manifest.push_back({{"path", clip.spec.path.generic_string()},
                        {"split", corpus::to_string(clip.spec.split)},
                        {"clip_id", clip.spec.clip_id}});
  }
  const auto path = dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << manifest.dump(2) << "\n";
  return path;
}

}  // namespace timbrelab::tones
