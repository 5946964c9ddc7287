#pragma once

#include <stdexcept>
#include <string>

namespace gloss {

// Failure categories; the CLI maps each to its own exit code.
enum class ErrorKind {
  invalid_argument,  // bad parameter value or out-of-range index
  shape_mismatch,    // incompatible extents / schema violation
  io,                // unreadable or unwritable file, malformed container
  numerical,         // non-finite values or failed factorization
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

namespace detail {

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace detail
}  // namespace gloss
