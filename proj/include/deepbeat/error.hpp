#pragma once

#include <stdexcept>
#include <string>

namespace deepbeat {

enum class ErrorKind {
  Config,
  Domain,
  Shape,
  Numeric,
  Data,
  State,
  UndefinedMetric,
  Io,
  Format,
};

/// Every failure raised by the library carries one of the kinds above so the
/// C boundary can map it onto a status code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

inline const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Config: return "configuration error";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::State: return "state error";
    case ErrorKind::UndefinedMetric: return "undefined metric";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Format: return "format error";
  }
  return "error";
}

}  // namespace deepbeat
