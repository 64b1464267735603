#include "vmerton/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vmerton/errors.hpp"

namespace vmerton {
namespace {

// Values are flattened to k doubles per node (k = d for vectors, d*d
// column-major for matrices) so the O(n^2) history sums run on raw arrays.
struct FlatWeights {
  std::size_t k = 0;
  std::vector<double> interval;  // [lag-1][c]
  std::vector<double> older;
  std::vector<double> newer;
};

FlatWeights vector_weights(const DiagonalKernel& kernel, const TimeGrid& grid) {
  const std::size_t d = kernel.size();
  const std::size_t n = grid.n_steps();
  FlatWeights w{d, std::vector<double>(n * d), std::vector<double>(n * d),
                std::vector<double>(n * d)};
  for (std::size_t i = 0; i < d; ++i) {
    const auto kw = kernel_weights(kernel[i], grid);
    for (std::size_t m = 0; m < n; ++m) {
      w.interval[m * d + i] = kw.interval[m];
      w.older[m * d + i] = kw.older[m];
      w.newer[m * d + i] = kw.newer[m];
    }
  }
  return w;
}

FlatWeights matrix_weights(const DiagonalKernel& kernel, const TimeGrid& grid) {
  const std::size_t d = kernel.size();
  const std::size_t n = grid.n_steps();
  const auto v = vector_weights(kernel, grid);
  const std::size_t k = d * d;
  FlatWeights w{k, std::vector<double>(n * k), std::vector<double>(n * k),
                std::vector<double>(n * k)};
  for (std::size_t m = 0; m < n; ++m) {
    for (std::size_t col = 0; col < d; ++col) {
      for (std::size_t row = 0; row < d; ++row) {
        const std::size_t c = col * d + row;
        w.interval[m * k + c] = 0.5 * (v.interval[m * d + row] + v.interval[m * d + col]);
        w.older[m * k + c] = 0.5 * (v.older[m * d + row] + v.older[m * d + col]);
        w.newer[m * k + c] = 0.5 * (v.newer[m * d + row] + v.newer[m * d + col]);
      }
    }
  }
  return w;
}

double sup_norm(const double* x, std::size_t k) {
  double out = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    if (!std::isfinite(x[c])) return std::numeric_limits<double>::infinity();
    out = std::max(out, std::abs(x[c]));
  }
  return out;
}

// Generic PECE loop. `eval(in, out)` writes F at a flattened value.
template <class Eval>
std::pair<std::vector<double>, std::optional<BlowUp>> adams_pece(const FlatWeights& w,
                                                                 const TimeGrid& grid,
                                                                 Eval eval,
                                                                 double threshold) {
  const std::size_t k = w.k;
  const std::size_t n = grid.n_steps();
  std::vector<double> psi(k, 0.0);  // node 0
  std::vector<double> F((n + 1) * k, 0.0);
  psi.reserve((n + 1) * k);
  eval(psi.data(), F.data());

  std::vector<double> pred(k), hist(k), fp(k);
  std::optional<BlowUp> blowup;
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(pred.begin(), pred.end(), 0.0);
    std::fill(hist.begin(), hist.end(), 0.0);
    // Node j carries lag s + 1 - j for the new node s + 1.
    for (std::size_t j = 0; j <= s; ++j) {
      const double* f = &F[j * k];
      const std::size_t lag = s - j;  // (s + 1 - j) - 1
      const double* wi = &w.interval[lag * k];
      const double* wo = &w.older[lag * k];
      for (std::size_t c = 0; c < k; ++c) {
        pred[c] += wi[c] * f[c];
        hist[c] += wo[c] * f[c];
      }
      if (j > 0) {
        const double* wn = &w.newer[(lag + 1) * k];
        for (std::size_t c = 0; c < k; ++c) hist[c] += wn[c] * f[c];
      }
    }
    eval(pred.data(), fp.data());
    const double* wn1 = &w.newer[0];
    const std::size_t base = (s + 1) * k;
    psi.resize(base + k);
    for (std::size_t c = 0; c < k; ++c) psi[base + c] = hist[c] + wn1[c] * fp[c];

    const double norm = sup_norm(&psi[base], k);
    if (!(norm <= threshold)) {
      blowup = BlowUp{grid.node(s), norm};
      psi.resize(base);
      break;
    }
    eval(&psi[base], &F[base]);
  }
  return {std::move(psi), blowup};
}

void check_finite_rhs(bool finite) {
  if (!finite) throw SolverError("Riccati right-hand side has non-finite coefficients");
}

void check_vector_shapes(const DiagonalKernel& kernel, const VectorRiccatiRHS& rhs) {
  const auto d = rhs.a.size();
  if (d == 0 || rhs.q.size() != d || rhs.B.rows() != d || rhs.B.cols() != d ||
      static_cast<Eigen::Index>(kernel.size()) != d) {
    throw ShapeError("vector Riccati: inconsistent dimensions");
  }
}

void check_matrix_shapes(const DiagonalKernel& kernel, const MatrixRiccatiRHS& rhs) {
  const auto d = rhs.M.rows();
  if (d == 0 || rhs.M.cols() != d || rhs.S.rows() != d || rhs.S.cols() != d ||
      rhs.Gamma.rows() != d || rhs.Gamma.cols() != d ||
      static_cast<Eigen::Index>(kernel.size()) != d) {
    throw ShapeError("matrix Riccati: inconsistent dimensions");
  }
}

}  // namespace

Eigen::VectorXd VectorRiccatiRHS::operator()(const Eigen::VectorXd& psi) const {
  return a + B.transpose() * psi + q.cwiseProduct(psi.cwiseAbs2());
}

Eigen::MatrixXd MatrixRiccatiRHS::operator()(const Eigen::MatrixXd& psi) const {
  Eigen::MatrixXd out = psi * M;
  out += M.transpose() * psi;
  out += 2.0 * psi * S * psi;
  out += Gamma;
  return 0.5 * (out + out.transpose());
}

template <class Value>
const Value& RiccatiPath<Value>::reversed(std::size_t j) const {
  if (!complete()) {
    throw BlowUpError("Riccati solution blew up before the horizon",
                      blowup ? blowup->detected_at : grid.node(values.size() - 1));
  }
  return values[grid.n_steps() - j];
}

template <class Value>
Sampled<Value> RiccatiPath<Value>::sampled() const {
  if (!complete()) {
    throw BlowUpError("Riccati solution blew up before the horizon",
                      blowup ? blowup->detected_at : grid.node(values.size() - 1));
  }
  return Sampled<Value>{grid, values};
}

template struct RiccatiPath<Eigen::VectorXd>;
template struct RiccatiPath<Eigen::MatrixXd>;

VectorRiccatiRHS build_F1(const VectorModel& model) {
  require_valid(model);
  if (!model.degenerate()) {
    throw ModelError("F1 requires equal correlations rho_1 = ... = rho_d");
  }
  const double g = model.gamma;
  const double c = distortion_constant(g, model.rho(0));
  VectorRiccatiRHS rhs;
  rhs.a = g / (2.0 * c * (1.0 - g)) * model.theta.cwiseAbs2();
  rhs.B = lambda_matrix(model).value;
  rhs.q = 0.5 * model.nu.cwiseAbs2();
  return rhs;
}

VectorRiccatiRHS build_F2(const VectorModel& model) {
  require_valid(model);
  const double g = model.gamma;
  const double k = g / (1.0 - g);
  VectorRiccatiRHS rhs;
  rhs.a = 0.5 * k * model.theta.cwiseAbs2();
  rhs.B = lambda_matrix(model).value;
  rhs.q = 0.5 * model.nu.cwiseAbs2().cwiseProduct(
                    (Eigen::VectorXd::Ones(model.rho.size()) + k * model.rho.cwiseAbs2()));
  return rhs;
}

MatrixRiccatiRHS build_wishart_rhs(const WishartModel& model) {
  const auto d = static_cast<Eigen::Index>(model.dim());
  if (model.M.rows() != d || model.M.cols() != d || model.Q.rows() != d ||
      model.Q.cols() != d || model.rho.size() != d) {
    throw ShapeError("Wishart right-hand side: dimension mismatch");
  }
  if (!(model.gamma > 0.0 && model.gamma < 1.0)) throw ModelError("γ ∉ (0,1)");
  const double k = model.gamma / (1.0 - model.gamma);
  const Eigen::VectorXd Qr = model.Q.transpose() * model.rho;
  MatrixRiccatiRHS rhs;
  rhs.M = model.M + k * Qr * model.v.transpose();
  Eigen::MatrixXd S = model.Q.transpose() * model.Q + k * Qr * Qr.transpose();
  rhs.S = 0.5 * (S + S.transpose());
  Eigen::MatrixXd G = 0.5 * k * model.v * model.v.transpose();
  rhs.Gamma = 0.5 * (G + G.transpose());
  return rhs;
}

VectorRiccatiPath solve_riccati_vector(const DiagonalKernel& kernel, const VectorRiccatiRHS& rhs,
                                       const TimeGrid& grid, const SolverOptions& options) {
  check_vector_shapes(kernel, rhs);
  check_finite_rhs(rhs.a.allFinite() && rhs.B.allFinite() && rhs.q.allFinite());
  const auto d = rhs.a.size();
  const auto w = vector_weights(kernel, grid);
  // B^T psi in the loop; keep a column-major transposed copy.
  const Eigen::MatrixXd Bt = rhs.B.transpose();
  auto eval = [&](const double* in, double* out) {
    Eigen::Map<const Eigen::VectorXd> psi(in, d);
    Eigen::Map<Eigen::VectorXd> f(out, d);
    f = rhs.a + Bt * psi + rhs.q.cwiseProduct(psi.cwiseAbs2());
  };
  auto [flat, blowup] = adams_pece(w, grid, eval, options.blowup_threshold);

  VectorRiccatiPath path{grid, {}, blowup, 0.0};
  const std::size_t nodes = flat.size() / static_cast<std::size_t>(d);
  path.values.reserve(nodes);
  for (std::size_t j = 0; j < nodes; ++j) {
    path.values.push_back(Eigen::Map<const Eigen::VectorXd>(&flat[j * d], d));
  }
  if (options.compute_residual) path.residual = verify_fixed_point(path, kernel, rhs);
  return path;
}

MatrixRiccatiPath solve_riccati_matrix(const DiagonalKernel& kernel, const MatrixRiccatiRHS& rhs,
                                       const TimeGrid& grid, const SolverOptions& options) {
  check_matrix_shapes(kernel, rhs);
  check_finite_rhs(rhs.M.allFinite() && rhs.S.allFinite() && rhs.Gamma.allFinite());
  const auto d = rhs.M.rows();
  const auto w = matrix_weights(kernel, grid);
  auto eval = [&](const double* in, double* out) {
    Eigen::Map<const Eigen::MatrixXd> psi(in, d, d);
    Eigen::Map<Eigen::MatrixXd>(out, d, d) = rhs(psi);
  };
  auto [flat, blowup] = adams_pece(w, grid, eval, options.blowup_threshold);

  MatrixRiccatiPath path{grid, {}, blowup, 0.0};
  const std::size_t k = static_cast<std::size_t>(d * d);
  const std::size_t nodes = flat.size() / k;
  path.values.reserve(nodes);
  for (std::size_t j = 0; j < nodes; ++j) {
    Eigen::MatrixXd psi = Eigen::Map<const Eigen::MatrixXd>(&flat[j * k], d, d);
    path.values.push_back(0.5 * (psi + psi.transpose()));
  }
  if (options.compute_residual) path.residual = verify_fixed_point(path, kernel, rhs);
  return path;
}

namespace {

template <class Value, class Field>
RiccatiPath<Value> rk4(const TimeGrid& grid, Value psi, Field field, std::size_t substeps,
                       double threshold) {
  if (substeps == 0) throw DomainError("RK4 needs at least one substep");
  RiccatiPath<Value> path{grid, {}, std::nullopt, 0.0};
  path.values.reserve(grid.size());
  path.values.push_back(psi);
  const double h = grid.step() / static_cast<double>(substeps);
  for (std::size_t j = 1; j <= grid.n_steps(); ++j) {
    for (std::size_t s = 0; s < substeps; ++s) {
      const Value k1 = field(psi);
      const Value k2 = field(Value(psi + 0.5 * h * k1));
      const Value k3 = field(Value(psi + 0.5 * h * k2));
      const Value k4 = field(Value(psi + h * k3));
      psi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    const double norm = psi.cwiseAbs().maxCoeff();
    if (!std::isfinite(norm) || norm > threshold) {
      path.blowup = BlowUp{grid.node(j - 1), std::isfinite(norm) ? norm : HUGE_VAL};
      break;
    }
    path.values.push_back(psi);
  }
  return path;
}

}  // namespace

VectorRiccatiPath solve_riccati_ode(const DiagonalKernel& kernel, const VectorRiccatiRHS& rhs,
                                    const TimeGrid& grid, std::size_t substeps,
                                    const SolverOptions& options) {
  check_vector_shapes(kernel, rhs);
  check_finite_rhs(rhs.a.allFinite() && rhs.B.allFinite() && rhs.q.allFinite());
  Eigen::VectorXd c(rhs.a.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = kernel[static_cast<std::size_t>(i)].scale();
  auto field = [&](const Eigen::VectorXd& psi) -> Eigen::VectorXd {
    return c.cwiseProduct(rhs(psi));
  };
  return rk4<Eigen::VectorXd>(grid, Eigen::VectorXd::Zero(rhs.a.size()), field, substeps,
                              options.blowup_threshold);
}

MatrixRiccatiPath solve_riccati_ode(const DiagonalKernel& kernel, const MatrixRiccatiRHS& rhs,
                                    const TimeGrid& grid, std::size_t substeps,
                                    const SolverOptions& options) {
  check_matrix_shapes(kernel, rhs);
  check_finite_rhs(rhs.M.allFinite() && rhs.S.allFinite() && rhs.Gamma.allFinite());
  const auto d = rhs.M.rows();
  Eigen::MatrixXd c(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      c(i, j) = 0.5 * (kernel[static_cast<std::size_t>(i)].scale() +
                       kernel[static_cast<std::size_t>(j)].scale());
    }
  }
  auto field = [&](const Eigen::MatrixXd& psi) -> Eigen::MatrixXd {
    return c.cwiseProduct(rhs(psi));
  };
  return rk4<Eigen::MatrixXd>(grid, Eigen::MatrixXd::Zero(d, d), field, substeps,
                              options.blowup_threshold);
}

bool GlobalExistence::all() const noexcept {
  return applicable && std::all_of(components.begin(), components.end(), [](bool b) { return b; });
}

GlobalExistence check_global_existence_diagonal(const VectorModel& model) {
  require_valid(model);
  GlobalExistence out;
  const auto d = static_cast<Eigen::Index>(model.dim());
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (i != j && model.D(i, j) != 0.0) return out;
    }
  }
  out.applicable = true;
  const double g = model.gamma;
  const double k = g / (1.0 - g);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double nu = model.nu(i);
    const double rho = model.rho(i);
    const double theta = model.theta(i);
    const double e = model.D(i, i) + k * nu * rho * theta;
    const double disc =
        e * e - k * ((1.0 - g + g * rho * rho) / (1.0 - g)) * nu * nu * theta * theta;
    out.components.push_back(e < 0.0 && disc > 0.0);
  }
  return out;
}

namespace {

template <class Value, class Rhs, class Weight>
double midpoint_residual(const RiccatiPath<Value>& path, const Rhs& rhs, Weight weight) {
  const std::size_t nodes = path.values.size();
  if (nodes < 2) return 0.0;
  std::vector<Value> fmid;
  fmid.reserve(nodes - 1);
  for (std::size_t j = 0; j + 1 < nodes; ++j) {
    fmid.push_back(rhs(Value(0.5 * (path.values[j] + path.values[j + 1]))));
  }
  double res = 0.0;
  for (std::size_t n = 1; n < nodes; ++n) {
    Value acc = Value::Zero(path.values[0].rows(), path.values[0].cols());
    for (std::size_t m = 1; m <= n; ++m) acc += weight(m).cwiseProduct(fmid[n - m]);
    res = std::max(res, (path.values[n] - acc).cwiseAbs().maxCoeff());
  }
  return res;
}

}  // namespace

double verify_fixed_point(const VectorRiccatiPath& path, const DiagonalKernel& kernel,
                          const VectorRiccatiRHS& rhs) {
  check_vector_shapes(kernel, rhs);
  const auto d = rhs.a.size();
  std::vector<Eigen::VectorXd> w(path.grid.n_steps(), Eigen::VectorXd(d));
  for (Eigen::Index i = 0; i < d; ++i) {
    const auto kw = kernel_weights(kernel[static_cast<std::size_t>(i)], path.grid);
    for (std::size_t m = 0; m < w.size(); ++m) w[m](i) = kw.interval[m];
  }
  return midpoint_residual(path, rhs, [&](std::size_t m) -> const Eigen::VectorXd& {
    return w[m - 1];
  });
}

double verify_fixed_point(const MatrixRiccatiPath& path, const DiagonalKernel& kernel,
                          const MatrixRiccatiRHS& rhs) {
  check_matrix_shapes(kernel, rhs);
  const auto d = rhs.M.rows();
  std::vector<Eigen::MatrixXd> w(path.grid.n_steps(), Eigen::MatrixXd(d, d));
  std::vector<KernelWeights> kw;
  for (const auto& k : kernel) kw.push_back(kernel_weights(k, path.grid));
  for (std::size_t m = 0; m < w.size(); ++m) {
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) {
        w[m](i, j) = 0.5 * (kw[static_cast<std::size_t>(i)].interval[m] +
                            kw[static_cast<std::size_t>(j)].interval[m]);
      }
    }
  }
  return midpoint_residual(path, rhs, [&](std::size_t m) -> const Eigen::MatrixXd& {
    return w[m - 1];
  });
}

}  // namespace vmerton
