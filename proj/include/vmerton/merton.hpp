#pragma once

#include <vector>

#include <Eigen/Dense>

#include "vmerton/model.hpp"
#include "vmerton/numkernel.hpp"
#include "vmerton/riccati.hpp"

namespace vmerton {

/// Optimal fractions of wealth pi*(t_j) = myopic + hedging(t_j).
struct StrategyPath {
  TimeGrid grid;
  std::vector<Eigen::VectorXd> weights;
  std::vector<Eigen::VectorXd> hedging;
  Eigen::VectorXd myopic;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(myopic.size()); }
};

/// pi -> scale * pi + shift, applied to every component at every node;
/// hedging and myopic parts are scaled the same way and the shift is
/// booked on the myopic part.
StrategyPath transform_strategy(const StrategyPath& strategy, double scale, double shift);

/// Deterministic strategy with the same weights at every node.
StrategyPath constant_strategy(const TimeGrid& grid, const Eigen::VectorXd& weights);

struct ValueReport {
  double value;
  double log_value;  // log of value; finite even when value overflows
  SampledScalar log_value_integrand;
  double x0;
  double certainty_equivalent;
};

/// pi* = (theta + c psi(T-t) N P) / (1-gamma) from the F1 solution psi.
StrategyPath strategy_degenerate(const VectorModel& model, const VectorRiccatiPath& psi);
/// pi* = (theta + phi(T-t) N P) / (1-gamma) from the F2 solution phi.
StrategyPath strategy_general(const VectorModel& model, const VectorRiccatiPath& phi);
/// pi* = (v + 2 psi(T-t) Q^T rho) / (1-gamma).
StrategyPath strategy_wishart(const WishartModel& model, const MatrixRiccatiPath& psi);

/// x0^gamma/gamma exp(int_0^T gamma r + F2(phi)(T-s) v0(s) ds).
ValueReport value_general(const VectorModel& model, const VectorRiccatiPath& phi, double x0);
/// Distortion value H(0, x0, V0) built from psi and the expected variance
/// curve xi0; requires equal correlations and a flat input curve.
ValueReport value_distortion(const VectorModel& model, const VectorRiccatiPath& psi, double x0);
/// x0^gamma/gamma exp(int_0^T gamma r + Tr[f(psi)(T-s) Sigma0 + psi(T-s) NN^T] ds).
ValueReport value_wishart(const WishartModel& model, const MatrixRiccatiPath& psi, double x0);

/// Trapezoidal integral of a rate function over the grid.
double integrated_rate(const RateFunction& rate, const TimeGrid& grid);

}  // namespace vmerton
