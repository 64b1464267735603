#pragma once

#include <vector>

namespace vmerton {

/// Two-parameter Mittag-Leffler function E_{alpha,beta}(z) for real z,
/// 0 < alpha <= 1 and beta > 0.
///
/// Small arguments are summed as a power series with precomputed
/// coefficients 1/Gamma(alpha k + beta). When the series would lose more
/// than four digits to cancellation (or would need too many terms) the
/// value is taken from the real-line inverse Laplace representation,
/// which is free of cancellation for negative arguments.
class MittagLeffler {
 public:
  MittagLeffler(double alpha, double beta);

  double operator()(double z) const;

  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }

 private:
  bool try_series(double z, double& out) const;

  double alpha_;
  double beta_;
  std::vector<double> inv_gamma_;  // -log Gamma(alpha k + beta)
};

/// Convenience wrapper; builds the coefficient table on every call.
double mittag_leffler(double alpha, double beta, double z);

}  // namespace vmerton
