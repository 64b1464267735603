#include "vmerton/model.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "vmerton/errors.hpp"

namespace vmerton {
namespace {

std::string idx(std::size_t i) { return "[" + std::to_string(i) + "]"; }

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

void check_gamma(double gamma, std::vector<Violation>& out) {
  if (!(gamma > 0.0 && gamma < 1.0)) out.push_back({"gamma", "γ ∉ (0,1)"});
}

void check_kernel(const DiagonalKernel& kernel, std::size_t d,
                  std::vector<Violation>& out) {
  if (kernel.size() != d) {
    out.push_back({"kernel", "expected " + std::to_string(d) + " diagonal kernels, got " +
                                 std::to_string(kernel.size())});
  }
}

void check_rate(const RateFunction& rate, std::vector<Violation>& out) {
  if (!rate) out.push_back({"r", "rate function is not set"});
}

}  // namespace

RateFunction constant_rate(double r) {
  return [r](double) { return r; };
}

Eigen::VectorXd VectorModel::input_curve(double t) const {
  Eigen::VectorXd out = V0;
  if (b0.size() == 0) return out;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (b0(i) != 0.0) out(i) += kernel[static_cast<std::size_t>(i)].integral(t) * b0(i);
  }
  return out;
}

bool VectorModel::degenerate() const {
  for (Eigen::Index i = 1; i < rho.size(); ++i) {
    if (rho(i) != rho(0)) return false;
  }
  return true;
}

std::vector<Violation> validate(const VectorModel& m) {
  std::vector<Violation> out;
  const std::size_t d = m.dim();
  const auto n = static_cast<Eigen::Index>(d);
  if (d == 0) {
    out.push_back({"theta", "model dimension must be at least 1"});
    return out;
  }
  if (m.nu.size() != n) out.push_back({"nu", "length differs from theta"});
  if (m.rho.size() != n) out.push_back({"rho", "length differs from theta"});
  if (m.V0.size() != n) out.push_back({"V0", "length differs from theta"});
  if (m.b0.size() != 0 && m.b0.size() != n) out.push_back({"b0", "length differs from theta"});
  if (m.D.rows() != n || m.D.cols() != n) out.push_back({"D", "must be d x d"});
  check_gamma(m.gamma, out);
  check_kernel(m.kernel, d, out);
  check_rate(m.rate, out);
  // Index checks need consistent shapes; everything else is still reported.
  const bool shapes_ok = m.nu.size() == n && m.rho.size() == n && m.V0.size() == n &&
                         (m.b0.size() == 0 || m.b0.size() == n) && m.D.rows() == n &&
                         m.D.cols() == n;
  if (!shapes_ok) return out;

  for (std::size_t i = 0; i < d; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    if (!(m.theta(k) >= 0.0)) out.push_back({"theta" + idx(i), "θ_i < 0"});
    if (!(m.nu(k) > 0.0)) out.push_back({"nu" + idx(i), "ν_i <= 0"});
    if (!(std::abs(m.rho(k)) <= 1.0)) out.push_back({"rho" + idx(i), "ρ_i ∉ [-1,1]"});
    if (!(m.V0(k) >= 0.0)) out.push_back({"V0" + idx(i), "V0_i < 0"});
    if (m.b0.size() != 0 && !(m.b0(k) >= 0.0)) out.push_back({"b0" + idx(i), "b0_i < 0"});
    for (std::size_t j = 0; j < d; ++j) {
      const auto l = static_cast<Eigen::Index>(j);
      if (i != j && !(m.D(k, l) >= 0.0)) {
        out.push_back({"D" + idx(i) + idx(j), "D" + idx(i) + idx(j) + " < 0"});
      }
    }
  }
  if (!all_finite(m.D)) out.push_back({"D", "non-finite entries"});
  return out;
}

std::vector<Violation> validate(const WishartModel& m) {
  std::vector<Violation> out;
  const std::size_t d = m.dim();
  const auto n = static_cast<Eigen::Index>(d);
  if (d == 0) {
    out.push_back({"v", "model dimension must be at least 1"});
    return out;
  }
  auto square = [&](const Eigen::MatrixXd& x, const char* name) {
    if (x.rows() != n || x.cols() != n) {
      out.push_back({name, "must be d x d"});
      return false;
    }
    if (!all_finite(x)) {
      out.push_back({name, "non-finite entries"});
      return false;
    }
    return true;
  };
  const bool shapes_ok = square(m.M, "M") & square(m.Q, "Q") & square(m.NNt, "NNt") &
                         square(m.Sigma0, "Sigma0");
  if (m.rho.size() != n) out.push_back({"rho", "length differs from v"});
  check_gamma(m.gamma, out);
  check_kernel(m.kernel, d, out);
  check_rate(m.rate, out);
  if (!shapes_ok || m.rho.size() != n) return out;

  if (!(m.rho.squaredNorm() <= 1.0)) out.push_back({"rho", "ρᵀρ > 1"});
  const double tol = 1e-12;
  if ((m.Sigma0 - m.Sigma0.transpose()).cwiseAbs().maxCoeff() > tol) {
    out.push_back({"Sigma0", "not symmetric"});
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.Sigma0, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > tol)) {
      out.push_back({"Sigma0", "not positive definite (smallest eigenvalue <= 1e-12)"});
    }
  }
  if ((m.NNt - m.NNt.transpose()).cwiseAbs().maxCoeff() > tol) {
    out.push_back({"NNt", "not symmetric"});
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.NNt, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -tol) {
      out.push_back({"NNt", "not positive semidefinite"});
    }
  }
  return out;
}

namespace {
template <class Model>
void require_valid_impl(const Model& model) {
  const auto violations = validate(model);
  if (violations.empty()) return;
  std::ostringstream os;
  os << "invalid model:";
  for (const auto& v : violations) os << "\n  " << v.message();
  throw ModelError(os.str());
}
}  // namespace

void require_valid(const VectorModel& model) { require_valid_impl(model); }
void require_valid(const WishartModel& model) { require_valid_impl(model); }

double distortion_constant(double gamma, double rho) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ModelError("distortion constant: γ ∉ (0,1)");
  if (!(std::abs(rho) <= 1.0)) throw ModelError("distortion constant: ρ ∉ [-1,1]");
  return (1.0 - gamma) / (1.0 - gamma + gamma * rho * rho);
}

LambdaMatrix lambda_matrix(const VectorModel& m) {
  const double g = m.gamma / (1.0 - m.gamma);
  LambdaMatrix out;
  out.value = m.D;
  out.value.diagonal() += g * m.nu.cwiseProduct(m.rho).cwiseProduct(m.theta);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.value);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  out.condition = smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
  out.invertible = out.condition <= 1e12;
  return out;
}

SampledVector linear_volterra_solution(const DiagonalKernel& kernel, const Eigen::MatrixXd& A,
                                       const Eigen::VectorXd& x0, const Eigen::VectorXd& b,
                                       const TimeGrid& grid) {
  const auto d = x0.size();
  if (static_cast<Eigen::Index>(kernel.size()) != d || A.rows() != d || A.cols() != d ||
      (b.size() != 0 && b.size() != d)) {
    throw ShapeError("linear Volterra solve: inconsistent dimensions");
  }
  std::vector<KernelWeights> w;
  w.reserve(kernel.size());
  for (const auto& k : kernel) w.push_back(kernel_weights(k, grid));

  const std::size_t n = grid.n_steps();
  SampledVector x{grid, std::vector<Eigen::VectorXd>(grid.size())};
  std::vector<Eigen::VectorXd> Ax(grid.size());
  x[0] = x0;
  Ax[0] = A * x0;

  Eigen::VectorXd newer1(d);
  for (Eigen::Index i = 0; i < d; ++i) newer1(i) = w[static_cast<std::size_t>(i)].newer[0];
  const Eigen::MatrixXd lhs =
      Eigen::MatrixXd::Identity(d, d) - newer1.asDiagonal() * A;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(lhs);

  for (std::size_t k = 1; k <= n; ++k) {
    Eigen::VectorXd rhs = x0;
    if (b.size() != 0) {
      for (Eigen::Index i = 0; i < d; ++i) {
        rhs(i) += kernel[static_cast<std::size_t>(i)].integral(grid.node(k)) * b(i);
      }
    }
    for (Eigen::Index i = 0; i < d; ++i) {
      const auto& wi = w[static_cast<std::size_t>(i)];
      double acc = 0.0;
      for (std::size_t m = 1; m <= k; ++m) {
        acc += wi.older[m - 1] * Ax[k - m](i);
        if (m > 1) acc += wi.newer[m - 1] * Ax[k - m + 1](i);
      }
      rhs(i) += acc;
    }
    x[k] = lu.solve(rhs);
    Ax[k] = A * x[k];
    if (!x[k].allFinite()) throw SolverError("linear Volterra solve produced non-finite values");
  }
  return x;
}

SampledVector expected_variance_curve(const VectorModel& model, const TimeGrid& grid) {
  require_valid(model);
  const auto lambda = lambda_matrix(model);
  return linear_volterra_solution(model.kernel, lambda.value, model.V0, model.b0, grid);
}

}  // namespace vmerton
