// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace timbrelab {

enum class ErrorKind {
  kInvalidArgument,
  kInvalidFrame,
  kEmptyCorpus,
  kCorruptFile,
  kUnsupportedVersion,
  kShape,
  kConfig,
  kIo,
  kUnsupportedModel,
  kDivergence,
  kDevice,
};

std::string_view to_string(ErrorKind kind);

/// Base exception for every failure raised by the library. `kind()` lets
/// callers (the CLI, the python bindings) branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace timbrelab
