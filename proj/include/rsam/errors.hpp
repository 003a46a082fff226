#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rsam {

// Operand dimensions do not fit the operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// QR of a (numerically) rank-deficient matrix, e.g. a retraction of a step
// that is too long for the current point.
class RankError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The requested object is too large to build (exact tangent basis guard).
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ascent direction has (near) zero norm, so no perturbation is defined.
class DegenerateGradientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what, long long step = -1)
      : std::runtime_error(what), step_(step) {}

  // Last step index at which the failure was observed, or -1.
  long long step() const noexcept { return step_; }

 private:
  long long step_;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LengthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BatchCompositionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace rsam
