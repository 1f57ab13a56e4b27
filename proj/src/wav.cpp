// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "timbrelab/wav.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "binary_io.hpp"
#include "timbrelab/error.hpp"

namespace timbrelab::wav {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

[[noreturn]] void corrupt(const std::filesystem::path& path, const std::string& what) {
  throw Error(ErrorKind::kCorruptFile, path.string() + ": " + what);
}

}  // namespace

std::int16_t to_pcm16(float sample) {
  const double clipped = std::clamp(static_cast<double>(sample), -1.0, 1.0);
  return static_cast<std::int16_t>(std::lround(clipped * 32767.0));
}

dsp::AudioBuffer read(const std::filesystem::path& path, ReadOptions options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());

  std::string tag;
  std::uint32_t riff_size = 0;
  if (!io::get_bytes(in, tag, 4) || tag != "RIFF") corrupt(path, "missing RIFF header");
  if (!io::get<std::uint32_t>(in, riff_size)) corrupt(path, "truncated RIFF header");
  if (!io::get_bytes(in, tag, 4) || tag != "WAVE") corrupt(path, "not a WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_format = false;
  std::vector<std::int16_t> pcm;
  bool have_data = false;

  while (!have_data) {
    std::uint32_t chunk_size = 0;
    if (!io::get_bytes(in, tag, 4) || !io::get<std::uint32_t>(in, chunk_size)) {
      corrupt(path, "no data chunk");
    }
    if (tag == "fmt ") {
      if (chunk_size < 16) corrupt(path, "fmt chunk too short");
      std::uint32_t byte_rate = 0;
      std::uint16_t block_align = 0;
      io::get(in, format);
      io::get(in, channels);
      io::get(in, rate);
      io::get(in, byte_rate);
      io::get(in, block_align);
      io::get(in, bits);
      if (!in) corrupt(path, "truncated fmt chunk");
      in.seekg(chunk_size - 16 + (chunk_size & 1), std::ios::cur);
      have_format = true;
    } else if (tag == "data") {
      if (!have_format) corrupt(path, "data chunk before fmt chunk");
      if ((format != kFormatPcm && format != kFormatExtensible) || bits != 16) {
        throw Error(ErrorKind::kInvalidArgument,
                    path.string() + ": only 16-bit PCM is supported (format " +
                        std::to_string(format) + ", " + std::to_string(bits) + " bits)");
      }
      if (channels == 0) corrupt(path, "zero channels");
      pcm.resize(chunk_size / sizeof(std::int16_t));
      in.read(reinterpret_cast<char*>(pcm.data()),
              static_cast<std::streamsize>(pcm.size() * sizeof(std::int16_t)));
      // Tolerate a data chunk that overstates its size (common in
      // streamed recordings); keep whole sample frames only.
      pcm.resize(static_cast<std::size_t>(in.gcount()) / sizeof(std::int16_t));
      have_data = true;
    } else {
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }

  dsp::AudioBuffer audio;
  audio.sample_rate = rate;
  const std::size_t frames = pcm.size() / channels;
  audio.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < channels; ++c) sum += pcm[i * channels + c];
    audio.samples[i] = static_cast<float>(sum / channels / 32768.0);
  }

  if (rate != options.target_rate) {
    if (!options.resample) {
      throw Error(ErrorKind::kInvalidArgument,
                  path.string() + ": sample rate " + std::to_string(rate) +
                      " Hz, expected " +
                      std::to_string(static_cast<long>(options.target_rate)) +
                      " Hz (pass --resample to convert)");
    }
    audio = resample_linear(audio, options.target_rate);
  }
  return audio;
}

void write(const std::filesystem::path& path, const dsp::AudioBuffer& audio) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  const auto rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate));
  out.write("RIFF", 4);
  io::put<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  io::put<std::uint32_t>(out, 16);
  io::put<std::uint16_t>(out, kFormatPcm);
  io::put<std::uint16_t>(out, 1);
  io::put<std::uint32_t>(out, rate);
  io::put<std::uint32_t>(out, rate * 2);
  io::put<std::uint16_t>(out, 2);
  io::put<std::uint16_t>(out, 16);
  out.write("data", 4);
  io::put<std::uint32_t>(out, data_bytes);
  std::vector<std::int16_t> pcm(audio.samples.size());
  std::transform(audio.samples.begin(), audio.samples.end(), pcm.begin(), to_pcm16);
  io::put_array<std::int16_t>(out, pcm);
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

dsp::AudioBuffer resample_linear(const dsp::AudioBuffer& audio, double target_rate) {
  if (!(target_rate > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "target rate must be positive");
  }
  dsp::AudioBuffer out;
  out.sample_rate = target_rate;
  if (audio.samples.empty()) return out;
  const double ratio = audio.sample_rate / target_rate;
  const auto length = static_cast<std::size_t>(
      std::floor((audio.samples.size() - 1) / ratio)) + 1;
  out.samples.resize(length);
  for (std::size_t i = 0; i < length; ++i) {
    const double pos = i * ratio;
    const auto left = static_cast<std::size_t>(pos);
    const std::size_t right = std::min(left + 1, audio.samples.size() - 1);
    const double frac = pos - left;
    out.samples[i] = static_cast<float>(audio.samples[left] * (1.0 - frac) +
                                        audio.samples[right] * frac);
  }
  return out;
}

}  // namespace timbrelab::wav
