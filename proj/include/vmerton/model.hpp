#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vmerton/numkernel.hpp"

namespace vmerton {

/// Deterministic short rate r(t).
using RateFunction = std::function<double(double)>;

RateFunction constant_rate(double r);

/// Multivariate affine Volterra market: d stocks with variances V driven by
///   V_t = v0(t) + int K(t-s) D V_s ds + int K(t-s) N sqrt(diag V_s) dB_s,
/// v0(t) = V0 + int_0^t K(s) ds b0, dB^i = rho_i dW1^i + sqrt(1-rho_i^2) dW2^i,
/// and stock drifts r + theta_i V_i.
struct VectorModel {
  Eigen::VectorXd theta;
  Eigen::VectorXd nu;  // diagonal of N
  Eigen::MatrixXd D;
  Eigen::VectorXd rho;
  Eigen::VectorXd V0;
  Eigen::VectorXd b0;  // empty or zero for a flat input curve
  RateFunction rate = constant_rate(0.0);
  double gamma = 0.5;
  DiagonalKernel kernel;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(theta.size()); }
  /// v0(t) = V0 + W(t) b0 componentwise.
  Eigen::VectorXd input_curve(double t) const;
  bool degenerate() const;
};

/// Volterra-Wishart market with covariance matrix Sigma:
///   Sigma_t = Sigma0 + int K(t-s)(NN^T + M Sigma + Sigma M^T) ds + noise,
/// stock drifts r + Sigma v and W^S = sqrt(1 - rho^T rho) B + W^sigma rho.
struct WishartModel {
  Eigen::MatrixXd M;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd NNt;
  Eigen::VectorXd rho;
  Eigen::VectorXd v;
  Eigen::MatrixXd Sigma0;
  RateFunction rate = constant_rate(0.0);
  double gamma = 0.5;
  DiagonalKernel kernel;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(v.size()); }
};

struct Violation {
  std::string field;
  std::string condition;

  std::string message() const { return field + ": " + condition; }
};

std::vector<Violation> validate(const VectorModel& model);
std::vector<Violation> validate(const WishartModel& model);

/// Throws ModelError listing every violation, if any.
void require_valid(const VectorModel& model);
void require_valid(const WishartModel& model);

/// c = (1-gamma) / (1-gamma+gamma rho^2).
double distortion_constant(double gamma, double rho);

struct LambdaMatrix {
  Eigen::MatrixXd value;
  bool invertible = true;
  double condition = 1.0;
};

/// Lambda = D + gamma/(1-gamma) diag(nu_i rho_i theta_i).
LambdaMatrix lambda_matrix(const VectorModel& model);

/// Solution x of the linear Volterra equation x = x0 + W b + K * (A x) on
/// the grid, by implicit product trapezoidal steps. W b is the input drift
/// (b may be empty).
SampledVector linear_volterra_solution(const DiagonalKernel& kernel, const Eigen::MatrixXd& A,
                                       const Eigen::VectorXd& x0, const Eigen::VectorXd& b,
                                       const TimeGrid& grid);

/// xi0(t) = E[V_t] under the distorted dynamics with drift matrix Lambda,
/// i.e. (I - int_0^t R(u) du) V0 with R the resolvent of -K Lambda.
SampledVector expected_variance_curve(const VectorModel& model, const TimeGrid& grid);

}  // namespace vmerton
