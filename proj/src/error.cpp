// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "timbrelab/error.hpp"

namespace timbrelab {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kInvalidFrame: return "invalid-frame";
    case ErrorKind::kEmptyCorpus: return "empty-corpus";
    case ErrorKind::kCorruptFile: return "corrupt-file";
    case ErrorKind::kUnsupportedVersion: return "unsupported-version";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kUnsupportedModel: return "unsupported-model";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kDevice: return "device";
  }
  return "unknown";
}

}  // namespace timbrelab
