#ifndef EXPFUN_ERROR_HPP
#define EXPFUN_ERROR_HPP

#include <stdexcept>
#include <string>

namespace expfun {

// Error categories; the CLI maps each onto a fixed exit code.
enum class ErrorKind {
  Domain,        // precondition of an operation violated
  NumericGuard,  // a declared numeric guard tripped (censoring, overflow, ...)
  Config,        // configuration parse or validation failure
  Oracle,        // an exact oracle suite disagreed with the implementation
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::NumericGuard: return "numeric_guard";
    case ErrorKind::Config: return "config";
    case ErrorKind::Oracle: return "oracle";
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

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace expfun

#endif  // EXPFUN_ERROR_HPP
