#include "vmerton/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <optional>
#include <thread>

#include <json.hpp>

#include "vmerton/errors.hpp"
#include "vmerton/output.hpp"

namespace vmerton {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

TimeGrid grid_of(const ExperimentConfig& cfg) {
  return TimeGrid(cfg.numerics.horizon, cfg.numerics.n_steps);
}

SolverOptions options_of(const ExperimentConfig& cfg) {
  SolverOptions o;
  o.blowup_threshold = cfg.numerics.blowup_threshold;
  return o;
}

VectorRiccatiRHS vector_rhs(const ExperimentConfig& cfg, const VectorModel& m) {
  return cfg.vector_case == VectorCase::degenerate ? build_F1(m) : build_F2(m);
}

template <class Path>
void require_complete(const Path& path) {
  if (path.complete()) return;
  const double t = path.blowup ? path.blowup->detected_at : 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", t);
  throw BlowUpError(std::string("Riccati solution blew up; T_max estimate ") + buf, t);
}

json vec_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

std::string short_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

std::string output_path(const ExperimentConfig& cfg, const std::string& stem) {
  return (fs::path(cfg.output.directory) / (cfg.name + "_" + stem)).string();
}

struct Writer {
  const ExperimentConfig& cfg;
  std::vector<std::string>& outputs;

  void file(const std::string& stem, const std::string& content) {
    const std::string path = output_path(cfg, stem);
    write_atomic(path, content);
    outputs.push_back(path);
  }
};

json hedging_summary(const StrategyPath& s) {
  json curv = json::array(), lo = json::array(), hi = json::array();
  for (std::size_t i = 0; i < s.dim(); ++i) {
    double mn = INFINITY, mx = -INFINITY;
    for (const auto& h : s.hedging) {
      mn = std::min(mn, h(static_cast<Eigen::Index>(i)));
      mx = std::max(mx, h(static_cast<Eigen::Index>(i)));
    }
    curv.push_back(curvature_statistic(s, i));
    lo.push_back(mn);
    hi.push_back(mx);
  }
  return {{"hedge_min", lo}, {"hedge_max", hi}, {"curvature", curv},
          {"pi_0", vec_json(s.weights.front())}, {"myopic", vec_json(s.myopic)}};
}

double residual_of(const RiccatiSolution& sol) {
  return std::visit([](const auto& p) { return p.residual; }, sol);
}

// Maps an exception to an exit code and a JSON error record.
void record_error(ExperimentReport& report, const std::exception_ptr& err) {
  json rec;
  try {
    std::rethrow_exception(err);
  } catch (const BlowUpError& e) {
    report.exit_code = exit_blowup;
    rec = {{"error", "blow-up"}, {"message", e.what()}, {"t_max", e.t_max()}};
  } catch (const SimulationError& e) {
    report.exit_code = exit_mc;
    rec = {{"error", "mc-failure"}, {"message", e.what()}, {"path", e.path()}};
  } catch (const ConfigError& e) {
    report.exit_code = exit_config;
    rec = {{"error", "config"}, {"message", e.what()}};
  } catch (const ModelError& e) {
    report.exit_code = exit_config;
    rec = {{"error", "model"}, {"message", e.what()}};
  } catch (const std::exception& e) {
    report.exit_code = exit_config;
    rec = {{"error", "runtime"}, {"message", e.what()}};
  }
  report.error = rec.dump();
}

void finish_report(const ExperimentConfig& cfg, ExperimentReport& report, json metrics,
                   const Stopwatch& clock) {
  metrics["runtime_s"] = clock.seconds();
  report.metrics = metrics.dump();
  if (cfg.output.wants("json")) {
    const std::string path = output_path(cfg, "report.json");
    report.outputs.push_back(path);
    try {
      write_atomic(path, report.to_json() + "\n");
    } catch (const std::exception&) {
      report.outputs.pop_back();
      if (report.exit_code == exit_ok) record_error(report, std::current_exception());
    }
  }
}

// One sweep point.
struct PointResult {
  double value = 0.0;
  std::optional<StrategyPath> strategy;
  std::optional<StrategyPath> classical;
  json metrics = json::object();
  std::exception_ptr error;
};

PointResult run_point(const ExperimentConfig& base, double value) {
  PointResult r;
  r.value = value;
  Stopwatch clock;
  try {
    const ExperimentConfig cfg = with_parameter(base, base.sweep->param, value);
    const auto sol = solve(cfg);
    r.strategy = optimal_strategy(cfg, sol);
    r.metrics = hedging_summary(*r.strategy);
    r.metrics["residual"] = residual_of(sol);
    if (base.kind == ExperimentKind::bl13_recovery) {
      r.classical = classical_strategy(cfg);
      double diff = 0.0, scale = 0.0;
      for (std::size_t j = 0; j < r.strategy->hedging.size(); ++j) {
        diff = std::max(diff, (r.strategy->hedging[j] - r.classical->hedging[j]).cwiseAbs().maxCoeff());
        scale = std::max(scale, r.classical->hedging[j].cwiseAbs().maxCoeff());
      }
      r.metrics["ode_sup_diff"] = diff;
      r.metrics["ode_rel_diff"] = scale > 0.0 ? diff / scale : diff;
    }
  } catch (...) {
    r.error = std::current_exception();
  }
  r.metrics["sweep_value"] = value;
  r.metrics["runtime_s"] = clock.seconds();
  return r;
}

void append_long(CsvTable& table, const std::string& param, double value, const StrategyPath& s,
                 const std::string& prefix, bool weights) {
  const std::string v = format_double(value);
  auto emit = [&](const std::string& series, auto get) {
    for (std::size_t j = 0; j < s.hedging.size(); ++j) {
      table.add_row({param, v, format_double(s.grid.node(j)), series, format_double(get(j))});
    }
  };
  for (std::size_t i = 0; i < s.dim(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const std::string n = std::to_string(i + 1);
    if (weights) emit(prefix + "pi_" + n, [&](std::size_t j) { return s.weights[j](k); });
    emit(prefix + "hedge_" + n, [&](std::size_t j) { return s.hedging[j](k); });
    if (weights) emit(prefix + "myopic_" + n, [&](std::size_t) { return s.myopic(k); });
  }
}

}  // namespace

std::string ExperimentReport::to_json() const {
  json out;
  out["config"] = json::parse(config_echo.empty() ? "{}" : config_echo);
  out["outputs"] = outputs;
  out["metrics"] = json::parse(metrics.empty() ? "{}" : metrics);
  out["exit_code"] = exit_code;
  out["error"] = error.empty() ? json(nullptr) : json::parse(error);
  return out.dump(2);
}

RiccatiSolution solve(const ExperimentConfig& cfg) {
  const TimeGrid grid = grid_of(cfg);
  if (cfg.is_wishart()) {
    const auto& m = std::get<WishartModel>(cfg.model);
    require_valid(m);
    return solve_riccati_matrix(m.kernel, build_wishart_rhs(m), grid, options_of(cfg));
  }
  const auto& m = std::get<VectorModel>(cfg.model);
  require_valid(m);
  return solve_riccati_vector(m.kernel, vector_rhs(cfg, m), grid, options_of(cfg));
}

StrategyPath optimal_strategy(const ExperimentConfig& cfg, const RiccatiSolution& sol) {
  if (cfg.is_wishart()) {
    const auto& path = std::get<MatrixRiccatiPath>(sol);
    require_complete(path);
    return strategy_wishart(std::get<WishartModel>(cfg.model), path);
  }
  const auto& path = std::get<VectorRiccatiPath>(sol);
  require_complete(path);
  const auto& m = std::get<VectorModel>(cfg.model);
  return cfg.vector_case == VectorCase::degenerate ? strategy_degenerate(m, path)
                                                   : strategy_general(m, path);
}

StrategyPath optimal_strategy(const ExperimentConfig& cfg) {
  return optimal_strategy(cfg, solve(cfg));
}

ValueReport optimal_value(const ExperimentConfig& cfg, const RiccatiSolution& sol) {
  if (cfg.is_wishart()) {
    const auto& path = std::get<MatrixRiccatiPath>(sol);
    require_complete(path);
    return value_wishart(std::get<WishartModel>(cfg.model), path, cfg.x0);
  }
  const auto& path = std::get<VectorRiccatiPath>(sol);
  require_complete(path);
  const auto& m = std::get<VectorModel>(cfg.model);
  return cfg.vector_case == VectorCase::degenerate ? value_distortion(m, path, cfg.x0)
                                                   : value_general(m, path, cfg.x0);
}

ValueReport optimal_value(const ExperimentConfig& cfg) { return optimal_value(cfg, solve(cfg)); }

StrategyPath classical_strategy(const ExperimentConfig& cfg, std::size_t substeps) {
  const TimeGrid grid = grid_of(cfg);
  if (cfg.is_wishart()) {
    const auto& m = std::get<WishartModel>(cfg.model);
    const auto path =
        solve_riccati_ode(m.kernel, build_wishart_rhs(m), grid, substeps, options_of(cfg));
    require_complete(path);
    return strategy_wishart(m, path);
  }
  const auto& m = std::get<VectorModel>(cfg.model);
  const auto path = solve_riccati_ode(m.kernel, vector_rhs(cfg, m), grid, substeps, options_of(cfg));
  require_complete(path);
  return cfg.vector_case == VectorCase::degenerate ? strategy_degenerate(m, path)
                                                   : strategy_general(m, path);
}

McCheck mc_check(const ExperimentConfig& cfg) {
  const auto sol = solve(cfg);
  const StrategyPath strategy = optimal_strategy(cfg, sol);
  const double analytic = optimal_value(cfg, sol).value;
  const McEstimate mc = std::visit(
      [&](const auto& m) { return mc_utility(m, strategy, cfg.simulation, cfg.x0); }, cfg.model);
  if (!std::isfinite(mc.mean) || !std::isfinite(mc.std_error)) {
    throw SimulationError("Monte Carlo estimate is not finite", 0);
  }
  const double z = mc.std_error > 0.0 ? (mc.mean - analytic) / mc.std_error : 0.0;
  return McCheck{analytic, mc, z};
}

double curvature_statistic(const StrategyPath& s, std::size_t component) {
  const auto k = static_cast<Eigen::Index>(component);
  const std::size_t n = s.hedging.size();
  if (n < 2) return 0.0;
  const double h0 = s.hedging.front()(k), h1 = s.hedging.back()(k);
  const double t0 = s.grid.node(0), t1 = s.grid.node(n - 1);
  double dev = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double chord = h0 + (h1 - h0) * (s.grid.node(j) - t0) / (t1 - t0);
    dev = std::max(dev, std::abs(s.hedging[j](k) - chord));
  }
  const double span = std::abs(h0 - h1);
  return span > 0.0 ? dev / span : 0.0;
}

ExperimentReport run(const ExperimentConfig& cfg) {
  Stopwatch clock;
  ExperimentReport report;
  report.config_echo = cfg.echo.empty() ? echo_config(cfg) : cfg.echo;
  Writer out{cfg, report.outputs};
  json metrics = json::object();
  const bool csv = cfg.output.wants("csv");
  try {
    switch (cfg.kind) {
      case ExperimentKind::solve: {
        const auto sol = solve(cfg);
        metrics["residual"] = residual_of(sol);
        std::visit(
            [&](const auto& path) {
              if (csv) out.file("psi.csv", riccati_table(path).str());
              metrics["complete"] = path.complete();
              if (path.blowup) metrics["t_max"] = path.blowup->detected_at;
              require_complete(path);
            },
            sol);
        if (!cfg.is_wishart()) {
          const auto g = check_global_existence_diagonal(std::get<VectorModel>(cfg.model));
          if (g.applicable) metrics["global_existence"] = g.components;
        }
        break;
      }
      case ExperimentKind::strategy: {
        const auto sol = solve(cfg);
        const auto s = optimal_strategy(cfg, sol);
        metrics = hedging_summary(s);
        metrics["residual"] = residual_of(sol);
        if (csv) out.file("strategy.csv", strategy_table(s).str());
        if (cfg.output.wants("svg")) {
          out.file("hedging.svg", render_svg(hedging_series(s), cfg.name + ": hedging demand",
                                             "t", "hedging demand"));
        }
        break;
      }
      case ExperimentKind::value: {
        const auto sol = solve(cfg);
        const auto v = optimal_value(cfg, sol);
        metrics = {{"value", v.value},
                   {"log_value", v.log_value},
                   {"certainty_equivalent", v.certainty_equivalent},
                   {"residual", residual_of(sol)}};
        if (csv) out.file("value.csv", value_table(cfg.numerics.horizon, v).str());
        break;
      }
      case ExperimentKind::mc_check: {
        const auto check = mc_check(cfg);
        metrics = {{"analytic", check.analytic},
                   {"mc_mean", check.mc.mean},
                   {"mc_stderr", check.mc.std_error},
                   {"z_score", check.z_score},
                   {"n_paths", check.mc.n_paths},
                   {"seed", cfg.simulation.seed}};
        if (csv) {
          CsvTable t({"analytic", "mc_mean", "mc_stderr", "z_score", "n_paths", "seed"});
          t.add_row({format_double(check.analytic), format_double(check.mc.mean),
                     format_double(check.mc.std_error), format_double(check.z_score),
                     std::to_string(check.mc.n_paths), std::to_string(cfg.simulation.seed)});
          out.file("mc_check.csv", t.str());
        }
        break;
      }
      default:
        throw ConfigError("kind " + to_string(cfg.kind) + " is a sweep; use sweep()");
    }
  } catch (...) {
    record_error(report, std::current_exception());
  }
  finish_report(cfg, report, std::move(metrics), clock);
  return report;
}

ExperimentReport sweep(const ExperimentConfig& cfg) {
  Stopwatch clock;
  ExperimentReport report;
  report.config_echo = cfg.echo.empty() ? echo_config(cfg) : cfg.echo;
  json metrics = json::object();
  try {
    if (!cfg.sweep) throw ConfigError("sweep: no swept parameter");
    if (cfg.sweep->values.empty()) throw ConfigError("sweep.values: sweep list is empty");
    const auto& values = cfg.sweep->values;
    const std::string& param = cfg.sweep->param;

    // Points run independently; results are collected by index.
    std::vector<PointResult> results(values.size());
    const std::size_t workers = worker_count(cfg.simulation, values.size());
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < values.size();) results[i] = run_point(cfg, values[i]);
      });
    }
    for (auto& t : pool) t.join();

    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    Writer out{cfg, report.outputs};
    const bool csv = cfg.output.wants("csv");
    CsvTable combined({"sweep_param", "sweep_value", "t", "series", "value"});
    std::vector<Series> curves;
    json points = json::array();
    std::exception_ptr first_error;
    for (std::size_t i : order) {
      auto& r = results[i];
      const std::string tag = param + "=" + short_number(r.value);
      if (r.error) {
        ExperimentReport tmp;
        record_error(tmp, r.error);
        r.metrics["error"] = json::parse(tmp.error);
        if (!first_error) first_error = r.error;
        points.push_back(r.metrics);
        continue;
      }
      if (csv) {
        out.file(param + "_" + short_number(r.value) + ".csv", strategy_table(*r.strategy).str());
        append_long(combined, param, r.value, *r.strategy, "", true);
        if (r.classical) append_long(combined, param, r.value, *r.classical, "ode_", false);
      }
      for (auto& s : hedging_series(*r.strategy, tag + " ")) curves.push_back(std::move(s));
      if (r.classical) {
        for (auto& s : hedging_series(*r.classical, "ODE " + tag + " ")) {
          curves.push_back(std::move(s));
        }
      }
      points.push_back(r.metrics);
    }
    metrics["sweep_param"] = param;
    metrics["points"] = points;
    if (csv && combined.rows() > 0) out.file("sweep.csv", combined.str());
    if (cfg.output.wants("svg") && !curves.empty()) {
      out.file("sweep.svg", render_svg(curves, cfg.name + ": hedging demand by " + param, "t",
                                       "hedging demand"));
    }
    if (first_error) std::rethrow_exception(first_error);
  } catch (...) {
    record_error(report, std::current_exception());
  }
  finish_report(cfg, report, std::move(metrics), clock);
  return report;
}

ExperimentReport execute(const ExperimentConfig& cfg) {
  return is_study(cfg.kind) ? sweep(cfg) : run(cfg);
}

}  // namespace vmerton
