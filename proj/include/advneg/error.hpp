#pragma once

#include <stdexcept>
#include <string>

namespace advneg {

// Error hierarchy maps onto the CLI exit codes: ConfigError -> 1,
// DataError -> 2, BackendError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  enum class Kind {
    unreachable,
    timeout,
    malformed_response,
    constraint_violation,
    unsatisfiable_constraints,
  };

  BackendError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

  static const char* kind_name(Kind k) {
    switch (k) {
      case Kind::unreachable: return "unreachable";
      case Kind::timeout: return "timeout";
      case Kind::malformed_response: return "malformed_response";
      case Kind::constraint_violation: return "constraint_violation";
      case Kind::unsatisfiable_constraints: return "unsatisfiable_constraints";
    }
    return "unknown";
  }

 private:
  Kind kind_;
};

}  // namespace advneg
