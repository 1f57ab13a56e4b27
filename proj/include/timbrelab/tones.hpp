// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Synthetic harmonic-tone material: one octave of C major played with a few
// distinct additive timbres. Used for demos, integration tests and the
// acceptance suite.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "timbrelab/corpus.hpp"

namespace timbrelab::tones {

struct Timbre {
  std::string name;
  std::vector<double> partials;  // amplitude of harmonic n+1
};

/// Four fixed timbres: saw-like, odd-harmonic, mellow and bright.
std::vector<Timbre> default_timbres();

/// MIDI-style note numbers C4..B4 of the C major scale.
std::vector<int> c_major_octave();

double midi_to_hz(int midi);

struct ToneOptions {
  std::size_t frames_per_clip = 36;
  std::uint64_t seed = 1;
  double vibrato_cents = 8.0;
  double noise_level = 1e-3;
};

/// One clip: attack/decay envelope, slow vibrato and a little seeded noise.
dsp::AudioBuffer render_tone(double f0, const Timbre& timbre, std::size_t samples,
                             std::uint64_t seed, const ToneOptions& options = {});

/// 7 notes x 4 timbres x 2 takes, about 2000 frames. Splits are per clip:
/// every note gets one validation and one test take, the rest train.
std::vector<corpus::ClipAudio> synthetic_clips(const ToneOptions& options = {});

/// Writes every clip as a WAV plus manifest.json into `dir`; returns the
/// manifest path.
std::filesystem::path write_demo_clips(const std::filesystem::path& dir,
                                       const ToneOptions& options = {});

}  // namespace timbrelab::tones
