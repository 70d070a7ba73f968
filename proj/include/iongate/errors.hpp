#pragma once

#include <stdexcept>
#include <string>

namespace iongate {

// Bad or inconsistent user input (unknown key, non-positive value, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A well-posed request whose physics cannot be satisfied.
class PhysicsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public PhysicsError {
 public:
  using PhysicsError::PhysicsError;
};

// The transverse Hessian has a non-positive eigenvalue: the linear chain
// buckles into a zigzag. Carries the most negative eigenvalue (rad^2/s^2).
class StabilityError : public PhysicsError {
 public:
  explicit StabilityError(double most_negative_eigenvalue)
      : PhysicsError("linear chain is unstable: transverse eigenvalue " +
                     std::to_string(most_negative_eigenvalue) + " rad^2/s^2"),
        eigenvalue_(most_negative_eigenvalue) {}

  double eigenvalue() const noexcept { return eigenvalue_; }

 private:
  double eigenvalue_;
};

}  // namespace iongate
