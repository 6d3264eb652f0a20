#pragma once

#include <stdexcept>
#include <string>

namespace statknn {

enum class ErrorKind {
  Config,      // invalid parameters or options
  Data,        // malformed or inconsistent input data
  Numerical,   // a computation lost all precision or produced non-finite values
  Invariant,   // internal consistency check failed
  NotCandidate // p-values requested for an instance that failed the screen
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Data: return "data";
    case ErrorKind::Numerical: return "numerical";
    case ErrorKind::Invariant: return "invariant";
    case ErrorKind::NotCandidate: return "not-a-candidate";
  }
  return "unknown";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace statknn
