#pragma once

#include <stdexcept>
#include <string>

namespace zikq {

enum class ErrorKind {
  InvalidParameter,
  InsufficientData,
  DataError,
  OutOfRange,
  NumericFailure,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::DataError: return "data-error";
    case ErrorKind::OutOfRange: return "out-of-range";
    case ErrorKind::NumericFailure: return "numeric-failure";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace zikq
