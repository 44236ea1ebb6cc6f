#pragma once

#include <stdexcept>
#include <string>

namespace setgeo {

// Categories map one-to-one onto sg_status codes in the C API.
enum class ErrorCode {
  kArgument = 1,
  kConfig,
  kDegenerateInput,
  kDomain,
  kOutOfCoverage,
  kData,
  kFormat,
  kIo,
  kInvariant,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

const char* error_code_name(ErrorCode code) noexcept;

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace setgeo
