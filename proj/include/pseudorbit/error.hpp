#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pseudorbit {

/// Point outside the phase space of a map or partition.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Derivative requested at a branch endpoint; the caller must pick a side.
class DiscontinuityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed map, partition or matrix (gaps, escaping images, size mismatch).
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Noise pushed a state (or a support ball) out of a non-wrapping domain.
class BoundaryError : public std::runtime_error {
 public:
  explicit BoundaryError(const std::string& what, std::size_t step = 0)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Skew-product image left [0,1] x S, i.e. the noise amplitude reached the map's margin.
class MarginError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The perturbed spectrum does not have the (1 simple, xi real) shape.
class MetastabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Hulls of distinct least elements overlap at the requested noise level.
class EpsTooLargeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace pseudorbit
