#pragma once

#include <stdexcept>
#include <string>

namespace fsad {

enum class ErrorCode {
  kInvalidArgument,
  kConfig,
  kIo,
  kFormat,
  kData,
  kNumeric,
  kInternal,
};

const char* to_string(ErrorCode code) noexcept;

// Every failure inside the library is reported as an fsad::Error. The C
// boundary translates the code into an fsad_status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace fsad
