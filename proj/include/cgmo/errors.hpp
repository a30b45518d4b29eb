#pragma once

#include <stdexcept>
#include <string>

namespace cgmo {

/// Argument outside the domain of an operation (e.g. arclength beyond [0, L]).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Invalid or inconsistent configuration: bad units, singular routing, etc.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed (factorization, integrator step underflow,
/// non-convergent solve).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Integrator gave up; carries the last accepted state for diagnosis.
template <typename State>
class StiffnessError : public NumericalError {
 public:
  StiffnessError(const std::string& what, double t, State last)
      : NumericalError(what), t_(t), last_(std::move(last)) {}
  double time() const { return t_; }
  const State& last_state() const { return last_; }

 private:
  double t_;
  State last_;
};

}  // namespace cgmo
