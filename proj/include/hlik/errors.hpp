// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace hlik {

/// Base of every error raised by the library. `code()` is a stable,
/// machine-readable identifier; `what()` carries the human text.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define HLIK_DEFINE_ERROR(Name)                                         \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

HLIK_DEFINE_ERROR(AngleNearPi);
HLIK_DEFINE_ERROR(ParseError);
HLIK_DEFINE_ERROR(ValidationError);
HLIK_DEFINE_ERROR(UnknownFrame);
HLIK_DEFINE_ERROR(DimensionMismatch);
HLIK_DEFINE_ERROR(EmptyDataset);
HLIK_DEFINE_ERROR(ColdStart);
HLIK_DEFINE_ERROR(FormatError);
HLIK_DEFINE_ERROR(VersionMismatch);
HLIK_DEFINE_ERROR(UnreachableGeometry);
HLIK_DEFINE_ERROR(MismatchedStreams);
HLIK_DEFINE_ERROR(IoError);
HLIK_DEFINE_ERROR(UsageError);

#undef HLIK_DEFINE_ERROR

}  // namespace hlik
