#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vmerton {

// Argument outside the mathematical domain of a function (t <= 0 for a
// singular kernel, non-finite Mittag-Leffler argument, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Incompatible vector/matrix dimensions or grids.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Model parameters that violate a structural requirement of an operation.
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical failure inside a solver that is not a blow-up (NaN propagation).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A Riccati path diverged before the requested horizon.
class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(const std::string& what, double t_max)
      : std::runtime_error(what), t_max_(t_max) {}
  double t_max() const noexcept { return t_max_; }

 private:
  double t_max_;
};

class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, std::size_t path)
      : std::runtime_error(what + " (path " + std::to_string(path) + ")"), path_(path) {}
  std::size_t path() const noexcept { return path_; }

 private:
  std::size_t path_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vmerton
