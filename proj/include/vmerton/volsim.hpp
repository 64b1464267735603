#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "vmerton/merton.hpp"
#include "vmerton/model.hpp"
#include "vmerton/numkernel.hpp"

namespace vmerton {

struct SimConfig {
  std::size_t n_paths = 10000;
  std::uint64_t seed = 42;
  double psd_floor = 0.0;       // eigenvalue clip level for Sigma
  double variance_floor = 0.0;  // componentwise clip for V
  bool antithetic = true;
  std::size_t threads = 0;  // 0: VOLTERRA_MERTON_THREADS or hardware
};

/// Simulated volatility paths. states[p][j] is V (d x 1) or Sigma (d x d)
/// at node j of path p, after clipping. increments[p] holds the driving
/// Brownian increments, one row per step:
///   vector model:  [dW1 (d) | dW2 (d)]
///   Wishart model: [dW^sigma column-major (d*d) | dB (d)]
struct PathBundle {
  TimeGrid grid;
  std::vector<std::vector<Eigen::MatrixXd>> states;
  std::vector<Eigen::MatrixXd> increments;
  std::size_t psd_violation_count = 0;
  std::optional<double> first_violation_time;  // earliest clip over all paths

  std::size_t n_paths() const noexcept { return states.size(); }
};

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_paths = 0;
};

/// Common-random-number comparison: estimates[k] for strategy k and
/// differences[k] for strategy k minus strategy 0, both over the same paths.
struct McComparison {
  std::vector<McEstimate> estimates;
  std::vector<McEstimate> differences;
};

PathBundle simulate_vector(const VectorModel& model, const TimeGrid& grid, const SimConfig& cfg);
PathBundle simulate_wishart(const WishartModel& model, const TimeGrid& grid,
                            const SimConfig& cfg);

/// Terminal wealth per path from the log-form solution of the wealth
/// equation, reusing the bundle's increments.
std::vector<double> simulate_wealth(const VectorModel& model, const StrategyPath& strategy,
                                    const PathBundle& bundle, double x0);
std::vector<double> simulate_wealth(const WishartModel& model, const StrategyPath& strategy,
                                    const PathBundle& bundle, double x0);

/// E[X_T^gamma / gamma]. Paths are streamed, not stored. With antithetic
/// sampling the standard error comes from the n_paths / 2 pair means.
McEstimate mc_utility(const VectorModel& model, const StrategyPath& strategy,
                      const SimConfig& cfg, double x0);
McEstimate mc_utility(const WishartModel& model, const StrategyPath& strategy,
                      const SimConfig& cfg, double x0);

McComparison mc_utility_crn(const VectorModel& model, const std::vector<StrategyPath>& strategies,
                            const SimConfig& cfg, double x0);
McComparison mc_utility_crn(const WishartModel& model,
                            const std::vector<StrategyPath>& strategies, const SimConfig& cfg,
                            double x0);

/// E[Z_T] for Z_T = exp(gamma int pi sigma dW - gamma^2/2 int |pi sigma|^2 dt),
/// the density that turns the optimal wealth into a martingale measure.
McEstimate martingale_diagnostic(const VectorModel& model, const StrategyPath& strategy,
                                 const SimConfig& cfg);
McEstimate martingale_diagnostic(const WishartModel& model, const StrategyPath& strategy,
                                 const SimConfig& cfg);

/// Worker count: cfg.threads if set, else VOLTERRA_MERTON_THREADS, else
/// hardware concurrency; never more than `work`.
std::size_t worker_count(const SimConfig& cfg, std::size_t work);

}  // namespace vmerton
