#pragma once

#include <stdexcept>
#include <string>

namespace air {

enum class ErrorKind {
  invalid_input,
  dimension_mismatch,
  unsupported_loss,
  wrong_magic,
  truncated,
  count_mismatch,
  parse,
  nonfinite,
  divergence,
  config,
  io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::dimension_mismatch: return "dimension-mismatch";
    case ErrorKind::unsupported_loss: return "unsupported-loss";
    case ErrorKind::wrong_magic: return "wrong-magic";
    case ErrorKind::truncated: return "truncated";
    case ErrorKind::count_mismatch: return "count-mismatch";
    case ErrorKind::parse: return "parse";
    case ErrorKind::nonfinite: return "nonfinite";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

/// Every failure in the library is reported as an Error carrying its kind,
/// so callers (tests, the CLI) can branch on the variant instead of the text.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace air
