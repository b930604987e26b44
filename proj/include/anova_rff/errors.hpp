#pragma once

#include <stdexcept>
#include <string>

namespace anova_rff {

/// Precondition violated by the caller (bad sizes, out-of-range parameters).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An object was used in a state that does not support the operation.
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Base for numerical failures (factorizations, solvers, quadrature).
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DecompositionFailure : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

class SolverFailure : public NumericalFailure {
 public:
  SolverFailure(const std::string& what, double residual)
      : NumericalFailure(what), residual_(residual) {}

  /// Last residual (or condition estimate) observed before giving up.
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class Unsupported : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

}  // namespace detail
}  // namespace anova_rff
