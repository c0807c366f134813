#pragma once

#include <stdexcept>
#include <string>

namespace manifold {

// Error taxonomy shared by the library and the CLI. The CLI maps kinds to
// process exit codes: config-class errors -> 2, numeric-class -> 3, io -> 4.
enum class ErrorKind {
  dimension,    // shape mismatch between operands
  capacity,     // request exceeds a configured dense-storage cap
  argument,     // invalid argument value (zero vector, bad index, ...)
  spec,         // inconsistent generator/layer specification
  config,       // malformed or contradictory run configuration
  training,     // training budget exhausted before reaching target loss
  convergence,  // iterative solver did not converge within its budget
  divergence,   // optimizer produced a non-finite loss
  numerical,    // other numeric failure (covariance repair, ...)
  io,           // file system / serialization failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::capacity: return "capacity";
    case ErrorKind::argument: return "argument";
    case ErrorKind::spec: return "spec";
    case ErrorKind::config: return "config";
    case ErrorKind::training: return "training";
    case ErrorKind::convergence: return "convergence";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace manifold
