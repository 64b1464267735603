#include "vmerton/merton.hpp"

#include <cmath>

#include "vmerton/errors.hpp"

namespace vmerton {
namespace {

void check_x0(double x0) {
  if (!(x0 > 0.0) || !std::isfinite(x0)) throw ModelError("initial wealth x0 must be positive");
}

double trapezoid(const std::vector<double>& f, double h) {
  if (f.size() < 2) return 0.0;
  double acc = 0.5 * (f.front() + f.back());
  for (std::size_t j = 1; j + 1 < f.size(); ++j) acc += f[j];
  return h * acc;
}

ValueReport finish_value(const TimeGrid& grid, std::vector<double> integrand, double gamma,
                         double x0) {
  const double integral = trapezoid(integrand, grid.step());
  const double log_value = gamma * std::log(x0) - std::log(gamma) + integral;
  // (gamma V)^{1/gamma} = x0 exp(integral / gamma)
  return ValueReport{std::exp(log_value), log_value, SampledScalar{grid, std::move(integrand)},
                     x0, x0 * std::exp(integral / gamma)};
}

template <class Path>
void check_path(const Path& path, const TimeGrid& grid) {
  if (!path.complete()) {
    throw BlowUpError("Riccati solution blew up before the horizon; T_max estimate " +
                          std::to_string(path.blowup ? path.blowup->detected_at : 0.0),
                      path.blowup ? path.blowup->detected_at : 0.0);
  }
  if (!(path.grid == grid)) throw ShapeError("Riccati path and strategy grid differ");
}

StrategyPath vector_strategy(const VectorModel& model, const VectorRiccatiPath& path,
                             double scale) {
  check_path(path, path.grid);
  const auto d = static_cast<Eigen::Index>(model.dim());
  if (path.values.front().size() != d) throw ShapeError("Riccati path dimension differs from model");
  const double inv = 1.0 / (1.0 - model.gamma);
  const Eigen::VectorXd np = model.nu.cwiseProduct(model.rho);
  StrategyPath out{path.grid, {}, {}, inv * model.theta};
  const std::size_t n = path.grid.n_steps();
  out.weights.reserve(n + 1);
  out.hedging.reserve(n + 1);
  for (std::size_t j = 0; j <= n; ++j) {
    Eigen::VectorXd hedge = (inv * scale) * path.reversed(j).cwiseProduct(np);
    out.weights.push_back(out.myopic + hedge);
    out.hedging.push_back(std::move(hedge));
  }
  return out;
}

}  // namespace

StrategyPath transform_strategy(const StrategyPath& s, double scale, double shift) {
  StrategyPath out = s;
  const auto ones = Eigen::VectorXd::Ones(s.myopic.size());
  out.myopic = scale * s.myopic + shift * ones;
  for (std::size_t j = 0; j < s.weights.size(); ++j) {
    out.hedging[j] = scale * s.hedging[j];
    out.weights[j] = out.myopic + out.hedging[j];
  }
  return out;
}

StrategyPath constant_strategy(const TimeGrid& grid, const Eigen::VectorXd& weights) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(weights.size());
  return StrategyPath{grid, std::vector<Eigen::VectorXd>(grid.size(), weights),
                      std::vector<Eigen::VectorXd>(grid.size(), zero), weights};
}

StrategyPath strategy_degenerate(const VectorModel& model, const VectorRiccatiPath& psi) {
  require_valid(model);
  if (!model.degenerate()) throw ModelError("degenerate strategy needs equal correlations");
  return vector_strategy(model, psi, distortion_constant(model.gamma, model.rho(0)));
}

StrategyPath strategy_general(const VectorModel& model, const VectorRiccatiPath& phi) {
  require_valid(model);
  return vector_strategy(model, phi, 1.0);
}

StrategyPath strategy_wishart(const WishartModel& model, const MatrixRiccatiPath& psi) {
  require_valid(model);
  check_path(psi, psi.grid);
  const auto d = static_cast<Eigen::Index>(model.dim());
  if (psi.values.front().rows() != d) throw ShapeError("Riccati path dimension differs from model");
  const double inv = 1.0 / (1.0 - model.gamma);
  const Eigen::VectorXd qr = model.Q.transpose() * model.rho;
  StrategyPath out{psi.grid, {}, {}, inv * model.v};
  const std::size_t n = psi.grid.n_steps();
  for (std::size_t j = 0; j <= n; ++j) {
    Eigen::VectorXd hedge = (2.0 * inv) * (psi.reversed(j) * qr);
    out.weights.push_back(out.myopic + hedge);
    out.hedging.push_back(std::move(hedge));
  }
  return out;
}

double integrated_rate(const RateFunction& rate, const TimeGrid& grid) {
  std::vector<double> r(grid.size());
  for (std::size_t j = 0; j < r.size(); ++j) r[j] = rate(grid.node(j));
  return trapezoid(r, grid.step());
}

ValueReport value_general(const VectorModel& model, const VectorRiccatiPath& phi, double x0) {
  require_valid(model);
  check_x0(x0);
  check_path(phi, phi.grid);
  const auto F2 = build_F2(model);
  const auto& grid = phi.grid;
  std::vector<double> integrand(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double s = grid.node(j);
    integrand[j] = model.gamma * model.rate(s) + F2(phi.reversed(j)).dot(model.input_curve(s));
  }
  return finish_value(grid, std::move(integrand), model.gamma, x0);
}

ValueReport value_distortion(const VectorModel& model, const VectorRiccatiPath& psi, double x0) {
  require_valid(model);
  check_x0(x0);
  check_path(psi, psi.grid);
  if (!model.degenerate()) throw ModelError("distortion value needs equal correlations");
  if (model.b0.size() != 0 && model.b0.cwiseAbs().maxCoeff() != 0.0) {
    throw ModelError("distortion value needs a flat input curve (b0 = 0)");
  }
  const double g = model.gamma;
  const double c = distortion_constant(g, model.rho(0));
  const auto& grid = psi.grid;
  const auto xi = expected_variance_curve(model, grid);
  const Eigen::VectorXd theta2 = model.theta.cwiseAbs2();
  const Eigen::VectorXd nu2 = model.nu.cwiseAbs2();
  std::vector<double> integrand(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double s = grid.node(j);
    const Eigen::VectorXd p2 = psi.reversed(j).cwiseAbs2();
    integrand[j] = g * model.rate(s) + g / (2.0 * (1.0 - g)) * theta2.dot(xi[j]) +
                   0.5 * c * p2.cwiseProduct(nu2).dot(xi[j]);
  }
  return finish_value(grid, std::move(integrand), g, x0);
}

ValueReport value_wishart(const WishartModel& model, const MatrixRiccatiPath& psi, double x0) {
  require_valid(model);
  check_x0(x0);
  check_path(psi, psi.grid);
  const auto f = build_wishart_rhs(model);
  const auto& grid = psi.grid;
  std::vector<double> integrand(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const auto& p = psi.reversed(j);
    integrand[j] = model.gamma * model.rate(grid.node(j)) +
                   (f(p) * model.Sigma0).trace() + (p * model.NNt).trace();
  }
  return finish_value(grid, std::move(integrand), model.gamma, x0);
}

}  // namespace vmerton
