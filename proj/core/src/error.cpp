// SPDX-License-Identifier: Apache-2.0
#include "v3dg/error.hpp"

namespace v3dg {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kArgument: return "argument error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kCorruption: return "corruption error";
    case ErrorKind::kReference: return "reference error";
    case ErrorKind::kValidation: return "validation error";
  }
  return "error";
}

void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, std::string(to_string(kind)) + ": " + message);
}

}  // namespace v3dg
