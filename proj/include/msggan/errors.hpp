#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace msggan {

/// An experiment or architecture configuration that cannot be resolved.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A quantity that should be mathematically well defined is not (for example
/// a covariance that is far from positive semi-definite).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A loss became non-finite during optimization.
class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(int64_t step, const std::string& what)
      : std::runtime_error("training diverged at step " + std::to_string(step) + ": " + what),
        step_(step) {}

  int64_t step() const noexcept { return step_; }

 private:
  int64_t step_;
};

/// A checkpoint written by an incompatible format version.
class CheckpointVersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace msggan
