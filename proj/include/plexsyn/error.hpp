#pragma once

#include <stdexcept>
#include <string>

namespace plexsyn {

enum class ErrorKind {
  validation,
  format,
  truncation,
  unsupported,
  domain,
  io,
  degenerate_fit,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::format: return "format";
    case ErrorKind::truncation: return "truncation";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::domain: return "domain";
    case ErrorKind::io: return "io";
    case ErrorKind::degenerate_fit: return "degenerate_fit";
  }
  return "unknown";
}

/// Every failure raised by the library carries an ErrorKind so callers (the
/// CLI in particular) can map it to an exit status without string matching.
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

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorKind::validation, what);
}

}  // namespace plexsyn
