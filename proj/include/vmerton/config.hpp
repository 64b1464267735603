#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vmerton/model.hpp"
#include "vmerton/volsim.hpp"

namespace vmerton {

enum class ExperimentKind {
  solve,
  strategy,
  value,
  mc_check,
  sweep,  // generic: sweep.param names the parameter
  sweep_alpha,
  sweep_horizon,
  sweep_gamma,
  bl13_recovery,
  regime_study,
  correlation_study,
  volofvol_study,
};

std::string to_string(ExperimentKind kind);
ExperimentKind parse_kind(const std::string& text);
bool is_study(ExperimentKind kind);

/// Which Riccati equation drives a vector-model run.
enum class VectorCase { general, degenerate };

struct NumericsConfig {
  double horizon = 1.0;
  std::size_t n_steps = 1000;
  double blowup_threshold = 1e8;
};

struct OutputConfig {
  std::string directory = "out";
  std::vector<std::string> formats{"csv"};

  bool wants(const std::string& format) const;
};

/// One swept parameter. Recognized names: alpha (every kernel), alpha_<k>
/// (kernel k, 1-based), T, gamma, q_scale (Q -> s Q), offdiag_scale
/// (off-diagonal entries of M and Q -> s times their value).
struct SweepSpec {
  std::string param;
  std::vector<double> values;
};

struct ExperimentConfig {
  std::string name = "experiment";
  ExperimentKind kind = ExperimentKind::strategy;
  std::variant<VectorModel, WishartModel> model;
  VectorCase vector_case = VectorCase::general;
  NumericsConfig numerics;
  SimConfig simulation;
  OutputConfig output;
  double x0 = 1.0;
  double r = 0.0;  // constant short rate, mirrored into the model
  /// Wishart only: NN^T = s Q^T Q, recomputed whenever Q changes.
  std::optional<double> nnt_scale;
  std::optional<SweepSpec> sweep;
  /// Canonical JSON of the resolved configuration (presets merged,
  /// overrides applied, defaults filled). Rebuilding from it is lossless.
  std::string echo;

  bool is_wishart() const { return std::holds_alternative<WishartModel>(model); }
};

/// Command-line overrides applied on top of the file.
struct ConfigOverrides {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::optional<std::vector<std::string>> formats;
  std::optional<ExperimentKind> kind;
};

/// Directory holding the bundled presets (VMERTON_PRESET_DIR environment
/// variable, else the compiled-in location).
std::string preset_directory();
std::vector<std::string> list_presets();
std::string preset_path(const std::string& name);

ExperimentConfig load_config(const std::string& path, const ConfigOverrides& overrides = {});
ExperimentConfig load_config_text(const std::string& text, const ConfigOverrides& overrides = {},
                                  const std::string& origin = "<string>");
ExperimentConfig load_preset(const std::string& name, const ConfigOverrides& overrides = {});

/// Canonical JSON text of a typed config; equal configs give equal text.
std::string echo_config(const ExperimentConfig& config);

/// Parameter swept by a study kind, or empty for kinds without a fixed one.
std::string study_parameter(ExperimentKind kind);

/// Copy of `config` with one sweep parameter set to `value`.
ExperimentConfig with_parameter(const ExperimentConfig& config, const std::string& param,
                                double value);

}  // namespace vmerton
