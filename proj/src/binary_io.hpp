// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Little-endian helpers shared by the WAV, corpus and model codecs.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>

namespace timbrelab::io {

static_assert(std::endian::native == std::endian::little,
              "file codecs assume a little-endian host");

template <typename T>
  requires std::is_arithmetic_v<T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
  requires std::is_arithmetic_v<T>
void put_array(std::ostream& out, std::span<const T> values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size_bytes()));
}

/// Returns false on a short read.
template <typename T>
  requires std::is_arithmetic_v<T>
bool get(std::istream& in, T& value) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&value), sizeof(T)));
}

template <typename T>
  requires std::is_arithmetic_v<T>
bool get_array(std::istream& in, std::span<T> values) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(values.data()),
                                   static_cast<std::streamsize>(values.size_bytes())));
}

inline bool get_bytes(std::istream& in, std::string& bytes, std::size_t count) {
  bytes.resize(count);
  return static_cast<bool>(in.read(bytes.data(), static_cast<std::streamsize>(count)));
}

}  // namespace timbrelab::io
