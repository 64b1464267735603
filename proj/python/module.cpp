#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "vmerton/config.hpp"
#include "vmerton/errors.hpp"
#include "vmerton/experiment.hpp"
#include "vmerton/mittag_leffler.hpp"
#include "vmerton/numkernel.hpp"

namespace py = pybind11;
using namespace vmerton;

namespace {

Eigen::MatrixXd stack(const std::vector<Eigen::VectorXd>& rows) {
  if (rows.empty()) return {};
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), rows[0].size());
  for (std::size_t j = 0; j < rows.size(); ++j) out.row(static_cast<Eigen::Index>(j)) = rows[j];
  return out;
}

Eigen::VectorXd nodes(const TimeGrid& grid, std::size_t count) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(count));
  for (std::size_t j = 0; j < count; ++j) t(static_cast<Eigen::Index>(j)) = grid.node(j);
  return t;
}

Kernel make_kernel(const std::string& family, double c, double alpha, double lambda) {
  if (family == "constant") return Kernel::constant(c);
  if (family == "fractional") return Kernel::fractional(c, alpha);
  if (family == "exponential") return Kernel::exponential(c, lambda);
  if (family == "gamma") return Kernel::gamma(c, lambda, alpha);
  throw DomainError("unknown kernel family '" + family + "'");
}

ConfigOverrides overrides(std::optional<std::string> out, std::optional<std::uint64_t> seed,
                          std::optional<std::size_t> steps) {
  ConfigOverrides o;
  o.out = std::move(out);
  o.seed = seed;
  o.steps = steps;
  return o;
}

py::dict solve_py(const ExperimentConfig& cfg) {
  const auto sol = solve(cfg);
  py::dict out;
  std::visit(
      [&](const auto& path) {
        out["t"] = nodes(path.grid, path.values.size());
        if constexpr (std::is_same_v<std::decay_t<decltype(path)>, VectorRiccatiPath>) {
          out["psi"] = stack(path.values);
        } else {
          out["psi"] = path.values;
        }
        out["complete"] = path.complete();
        out["t_max"] = path.blowup ? py::cast(path.blowup->detected_at) : py::none();
        out["residual"] = path.residual;
      },
      sol);
  return out;
}

py::dict strategy_py(const ExperimentConfig& cfg) {
  const auto s = optimal_strategy(cfg);
  py::dict out;
  out["t"] = nodes(s.grid, s.weights.size());
  out["pi"] = stack(s.weights);
  out["hedge"] = stack(s.hedging);
  out["myopic"] = s.myopic;
  return out;
}

py::dict value_py(const ExperimentConfig& cfg) {
  const auto v = optimal_value(cfg);
  py::dict out;
  out["value"] = v.value;
  out["log_value"] = v.log_value;
  out["certainty_equivalent"] = v.certainty_equivalent;
  return out;
}

py::dict mc_check_py(const ExperimentConfig& cfg) {
  McCheck c;
  {
    py::gil_scoped_release release;
    c = mc_check(cfg);
  }
  py::dict out;
  out["analytic"] = c.analytic;
  out["mc_mean"] = c.mc.mean;
  out["mc_stderr"] = c.mc.std_error;
  out["z_score"] = c.z_score;
  out["n_paths"] = c.mc.n_paths;
  return out;
}

}  // namespace

PYBIND11_MODULE(_vmerton, m) {
  m.doc() = "Optimal portfolios in affine Volterra and Volterra-Wishart volatility models";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ModelError>(m, "ModelError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<BlowUpError>(m, "BlowUpError", PyExc_ArithmeticError);
  py::register_exception<SimulationError>(m, "SimulationError", PyExc_ArithmeticError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_ArithmeticError);

  py::class_<ExperimentConfig>(m, "Config")
      .def_readonly("name", &ExperimentConfig::name)
      .def_property_readonly("kind", [](const ExperimentConfig& c) { return to_string(c.kind); })
      .def_property_readonly("horizon", [](const ExperimentConfig& c) { return c.numerics.horizon; })
      .def_property_readonly("n_steps", [](const ExperimentConfig& c) { return c.numerics.n_steps; })
      .def_property_readonly("seed", [](const ExperimentConfig& c) { return c.simulation.seed; })
      .def_property_readonly("is_wishart", &ExperimentConfig::is_wishart)
      .def_readonly("echo", &ExperimentConfig::echo)
      .def("with_parameter", &with_parameter, py::arg("param"), py::arg("value"))
      .def("__repr__", [](const ExperimentConfig& c) {
        return "<vmerton.Config " + c.name + " kind=" + to_string(c.kind) + ">";
      });

  m.def("load_config",
        [](const std::string& path, std::optional<std::string> out,
           std::optional<std::uint64_t> seed, std::optional<std::size_t> steps) {
          return load_config(path, overrides(std::move(out), seed, steps));
        },
        py::arg("path"), py::arg("out") = py::none(), py::arg("seed") = py::none(),
        py::arg("steps") = py::none());
  m.def("load_config_text",
        [](const std::string& text, std::optional<std::string> out,
           std::optional<std::uint64_t> seed, std::optional<std::size_t> steps) {
          return load_config_text(text, overrides(std::move(out), seed, steps));
        },
        py::arg("text"), py::arg("out") = py::none(), py::arg("seed") = py::none(),
        py::arg("steps") = py::none());
  m.def("load_preset",
        [](const std::string& name, std::optional<std::string> out,
           std::optional<std::uint64_t> seed, std::optional<std::size_t> steps) {
          return load_preset(name, overrides(std::move(out), seed, steps));
        },
        py::arg("name"), py::arg("out") = py::none(), py::arg("seed") = py::none(),
        py::arg("steps") = py::none());
  m.def("list_presets", &list_presets);
  m.def("preset_directory", &preset_directory);

  m.def("solve", &solve_py, py::arg("config"));
  m.def("strategy", &strategy_py, py::arg("config"));
  m.def("value", &value_py, py::arg("config"));
  m.def("mc_check", &mc_check_py, py::arg("config"));
  m.def("_execute",
        [](const ExperimentConfig& cfg) {
          py::gil_scoped_release release;
          return execute(cfg).to_json();
        },
        py::arg("config"));

  m.def("mittag_leffler", &mittag_leffler, py::arg("alpha"), py::arg("beta"), py::arg("z"));
  m.def("kernel",
        [](const std::string& family, double c, double alpha, double lam, double t) {
          return make_kernel(family, c, alpha, lam)(t);
        },
        py::arg("family"), py::arg("c") = 1.0, py::arg("alpha") = 1.0, py::arg("lam") = 0.0,
        py::arg("t"));
  m.def("resolvent",
        [](const std::string& family, double c, double alpha, double lam, double horizon,
           std::size_t n_steps) {
          const TimeGrid grid(horizon, n_steps);
          const auto r = resolvent_second_kind(make_kernel(family, c, alpha, lam), grid);
          return std::make_pair(nodes(grid, grid.size()),
                                Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(
                                    r.values.data(), static_cast<Eigen::Index>(r.values.size()))));
        },
        py::arg("family"), py::arg("c") = 1.0, py::arg("alpha") = 1.0, py::arg("lam") = 0.0,
        py::arg("horizon") = 1.0, py::arg("n_steps") = 1000);
}
