// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <filesystem>

#include "timbrelab/dsp.hpp"

namespace timbrelab::wav {

struct ReadOptions {
  /// Linearly resample anything that is not `target_rate`. Without it, a
  /// different rate is a kInvalidArgument error.
  bool resample = false;
  double target_rate = dsp::kSampleRate;
};

/// Reads 16-bit PCM RIFF/WAVE; multichannel input is averaged to mono.
dsp::AudioBuffer read(const std::filesystem::path& path, ReadOptions options = {});

/// Writes mono 16-bit PCM. Samples are clipped to [-1, 1] and rounded.
void write(const std::filesystem::path& path, const dsp::AudioBuffer& audio);

/// 16-bit PCM quantization used by `write`.
std::int16_t to_pcm16(float sample);

dsp::AudioBuffer resample_linear(const dsp::AudioBuffer& audio, double target_rate);

}  // namespace timbrelab::wav
