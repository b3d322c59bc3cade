#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hyperme {

enum class ErrorKind {
  kUsage,             // mismatched inputs, bad options
  kDomain,            // support violations, invalid densities
  kDegenerate,        // zero mass, empty grids
  kInfeasible,        // constraint target outside the feasible hull
  kNonConvergence,    // iteration budget exhausted
  kBoundary,          // stencil or grid leaves the parameter bounds
  kNumericalFailure,  // e.g. indefinite metric
  kResource,          // size caps exceeded
  kSingularity,       // singular Jacobian
};

std::string_view to_string(ErrorKind kind);

// Every engine failure carries the module that raised it; what() is
// "<module>: <message>".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message),
        kind_(kind),
        module_(std::move(module)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

class InfeasibleError : public Error {
 public:
  InfeasibleError(std::string module, const std::string& message, int component)
      : Error(ErrorKind::kInfeasible, std::move(module), message),
        component_(component) {}

  /// Index of the violating constraint, or -1 for a joint violation.
  int component() const noexcept { return component_; }

 private:
  int component_;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(std::string module, const std::string& message, double last_residual)
      : Error(ErrorKind::kNonConvergence, std::move(module), message),
        last_residual_(last_residual) {}

  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

}  // namespace hyperme
