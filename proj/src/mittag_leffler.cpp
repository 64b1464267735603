#include "vmerton/mittag_leffler.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "vmerton/errors.hpp"

namespace vmerton {
namespace {

constexpr std::size_t kMaxTerms = 1200;
// Accept the series only if sum |terms| / |sum| stays below this.
constexpr double kMaxCancellation = 1e3;
constexpr double kQuadTol = 1e-14;

double rgamma(double x) {
  // 1/Gamma(x) with the poles mapped to zero.
  if (x <= 0.0 && x == std::floor(x)) return 0.0;
  return 1.0 / std::tgamma(x);
}

// Integral of a function with possible endpoint singularities over [0, b].
template <class F>
double finite_part(F f, double b) {
  thread_local boost::math::quadrature::tanh_sinh<double> integrator;
  return integrator.integrate(f, 0.0, b, kQuadTol);
}

template <class F>
double tail_part(F f, double a) {
  thread_local boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate(f, a, std::numeric_limits<double>::infinity(),
                              kQuadTol);
}

// alpha == 1: E_{1,beta}(z) = (1/Gamma(beta-1)) int_0^1 e^{zu} (1-u)^{beta-2} du
// for beta > 1, and the upward recurrence in beta otherwise.
double alpha_one(double beta, double z) {
  if (beta == 1.0) return std::exp(z);
  if (beta < 1.0) return rgamma(beta) + z * alpha_one(beta + 1.0, z);
  if (beta == 2.0) return z == 0.0 ? 1.0 : std::expm1(z) / z;
  auto f = [z, beta](double u, double uc) {
    const double one_minus_u = uc > 0.0 ? uc : 1.0 - u;
    return std::exp(z * u) * std::pow(one_minus_u, beta - 2.0);
  };
  thread_local boost::math::quadrature::tanh_sinh<double> integrator;
  return integrator.integrate(f, 0.0, 1.0, kQuadTol) * rgamma(beta - 1.0);
}

// Real-line representation obtained by collapsing the Hankel contour of
//   E_{a,b}(z) = (1/2 pi i) int e^s s^{a-b} / (s^a - z) ds
// onto the branch cut; valid for 0 < a < 1, b < 1 + a. For z > 0 the pole
// s = z^{1/a} contributes the residue (1/a) z^{(1-b)/a} exp(z^{1/a}).
double integral_route(double a, double b, double z) {
  if (a == 1.0) return alpha_one(b, z);
  if (b >= 1.0 + a) {
    // E_{a,b}(z) = (E_{a,b-a}(z) - 1/Gamma(b-a)) / z
    return (integral_route(a, b - a, z) - rgamma(b - a)) / z;
  }
  const double pi = std::numbers::pi;
  const double sin_b = std::sin(pi * b);
  const double sin_ba = std::sin(pi * (b - a));
  const double cos_a = std::cos(pi * a);
  auto f = [=](double r) {
    if (r == 0.0) return 0.0;
    const double ra = std::pow(r, a);
    const double num = ra * sin_b - z * sin_ba;
    const double den = ra * ra - 2.0 * z * ra * cos_a + z * z;
    return std::exp(-r) * std::pow(r, a - b) * num / den;
  };

  // The denominator is smallest where r^a = z cos(pi a); split there so the
  // near-pole peak (a close to 1, z < 0) sits on a panel boundary.
  double split = 1.0;
  const double peak_base = z * cos_a;
  if (peak_base > 0.0) {
    const double peak = std::pow(peak_base, 1.0 / a);
    if (peak < 60.0) split = peak;
  }
  double value = (finite_part(f, split) + tail_part(f, split)) / pi;
  if (z > 0.0) {
    value += std::pow(z, (1.0 - b) / a) * std::exp(std::pow(z, 1.0 / a)) / a;
  }
  return value;
}

}  // namespace

MittagLeffler::MittagLeffler(double alpha, double beta)
    : alpha_(alpha), beta_(beta) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw DomainError("Mittag-Leffler: alpha must lie in (0, 1]");
  }
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw DomainError("Mittag-Leffler: beta must be positive");
  }
  inv_gamma_.reserve(kMaxTerms);
  for (std::size_t k = 0; k < kMaxTerms; ++k) {
    // log-domain coefficient: the raw reciprocal underflows long before the
    // series stops being useful for |z| > 1.
    inv_gamma_.push_back(-std::lgamma(alpha * static_cast<double>(k) + beta));
  }
}

bool MittagLeffler::try_series(double z, double& out) const {
  const double log_abs_z = std::log(std::abs(z));
  const bool negative = z < 0.0;
  double sum = 0.0;
  double sum_abs = 0.0;
  double prev_log_term = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < inv_gamma_.size(); ++k) {
    const double log_term = static_cast<double>(k) * log_abs_z + inv_gamma_[k];
    if (log_term > 700.0) return false;
    double term = std::exp(log_term);
    sum_abs += term;
    if (negative && (k % 2 == 1)) term = -term;
    sum += term;
    if (k > 1 && log_term < prev_log_term &&
        std::exp(log_term) <= 1e-17 * std::abs(sum)) {
      if (sum_abs > kMaxCancellation * std::abs(sum)) return false;
      out = sum;
      return true;
    }
    prev_log_term = log_term;
  }
  return false;
}

double MittagLeffler::operator()(double z) const {
  if (!std::isfinite(z)) {
    throw DomainError("Mittag-Leffler: argument must be finite");
  }
  if (z == 0.0) return std::exp(inv_gamma_[0]);
  double value = 0.0;
  if (try_series(z, value)) return value;
  return integral_route(alpha_, beta_, z);
}

double mittag_leffler(double alpha, double beta, double z) {
  return MittagLeffler(alpha, beta)(z);
}

}  // namespace vmerton
