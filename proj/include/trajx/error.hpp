#pragma once

#include <stdexcept>
#include <string>

namespace trajx {

// Base for everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration values or flags.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (files, requests).
class DataError : public Error {
 public:
  using Error::Error;
};

// A file parsed fine but does not belong to the supplied environment / Q-table.
class HashMismatch : public DataError {
 public:
  using DataError::DataError;
};

// A stored invariant failed when re-checked.
class PropertyViolation : public Error {
 public:
  using Error::Error;
};

// Stepping an episode that already ended.
class EpisodeFinished : public Error {
 public:
  using Error::Error;
};

class InvalidAction : public Error {
 public:
  using Error::Error;
};

// Replaying a recorded trajectory produced a different transition.
class ReplayDivergence : public DataError {
 public:
  ReplayDivergence(std::size_t step, const std::string& what)
      : DataError("replay diverged at step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

// Value iteration ran out of iterations.
class ConvergenceError : public Error {
 public:
  ConvergenceError(int iterations, double residual)
      : Error("value iteration did not converge after " + std::to_string(iterations) +
              " iterations (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace trajx
