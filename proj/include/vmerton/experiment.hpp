#pragma once

#include <string>
#include <variant>
#include <vector>

#include "vmerton/config.hpp"
#include "vmerton/merton.hpp"
#include "vmerton/riccati.hpp"
#include "vmerton/volsim.hpp"

namespace vmerton {

/// Exit codes of the runner.
enum ExitCode : int {
  exit_ok = 0,
  exit_config = 1,
  exit_blowup = 2,
  exit_mc = 3,
};

struct ExperimentReport {
  std::string config_echo;           // resolved config, canonical JSON
  std::vector<std::string> outputs;  // files written, in creation order
  std::string metrics;               // JSON object
  int exit_code = exit_ok;
  std::string error;                 // JSON error record, empty on success

  /// {"config": ..., "outputs": [...], "metrics": ..., "exit_code": ..., "error": ...}
  std::string to_json() const;
};

using RiccatiSolution = std::variant<VectorRiccatiPath, MatrixRiccatiPath>;

/// Riccati path of the configured model on [0, T]; a blow-up is recorded
/// in the path, not thrown.
RiccatiSolution solve(const ExperimentConfig& config);
/// Throws BlowUpError if the Riccati path does not reach T.
StrategyPath optimal_strategy(const ExperimentConfig& config);
StrategyPath optimal_strategy(const ExperimentConfig& config, const RiccatiSolution& solution);
ValueReport optimal_value(const ExperimentConfig& config);
ValueReport optimal_value(const ExperimentConfig& config, const RiccatiSolution& solution);
/// Hedging demand from the classical (constant-kernel) Riccati ODE with the
/// configured kernel scales, on the config's grid.
StrategyPath classical_strategy(const ExperimentConfig& config, std::size_t substeps = 10);

struct McCheck {
  double analytic;
  McEstimate mc;
  double z_score;
};

McCheck mc_check(const ExperimentConfig& config);

/// max_t |h(t) - chord(t)| / |h(0) - h(T)| for hedging component i, the
/// chord joining the end points. 0 for a flat curve.
double curvature_statistic(const StrategyPath& strategy, std::size_t component);

/// Runs a single-point kind (solve, strategy, value, mc-check) and writes
/// its outputs. Errors are reported through exit_code and error.
ExperimentReport run(const ExperimentConfig& config);
/// Runs every sweep point (concurrently), one strategy file per point plus
/// a combined long-format CSV ordered by sweep value.
ExperimentReport sweep(const ExperimentConfig& config);
/// run() or sweep() according to the config kind.
ExperimentReport execute(const ExperimentConfig& config);

}  // namespace vmerton
