#pragma once

// Independent reference computations for the tests. Nothing here calls the
// library's numerics.

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "vmerton/model.hpp"

namespace oracle {

// Lanczos approximation (g = 7, n = 9), about 15 correct digits.
inline double gamma_fn(double x) {
  static const double c[] = {0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
                             771.32342877765313,   -176.61502916214059,   12.507343278686905,
                             -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  const double pi = 3.14159265358979323846;
  if (x < 0.5) return pi / (std::sin(pi * x) * gamma_fn(1.0 - x));
  x -= 1.0;
  double a = c[0];
  const double t = x + 7.5;
  for (int i = 1; i < 9; ++i) a += c[i] / (x + i);
  return std::sqrt(2.0 * pi) * std::pow(t, x + 0.5) * std::exp(-t) * a;
}

// Truncated Mittag-Leffler series in long double with a tail bound. Only
// meant for moderate |z| where cancellation is harmless at 64-bit mantissa.
struct SeriesResult {
  long double value;
  long double tail_bound;  // |first omitted term| times a geometric factor
};

inline SeriesResult ml_series(double alpha, double beta, double z, int terms = 200) {
  long double sum = 0.0L;
  long double last = 0.0L;
  for (int k = 0; k < terms; ++k) {
    const long double lg = std::lgamma(static_cast<long double>(alpha) * k + beta);
    const long double term =
        (z == 0.0 && k > 0) ? 0.0L
                            : std::pow(static_cast<long double>(std::abs(z)), k) * std::exp(-lg);
    last = term;
    sum += (z < 0.0 && (k % 2)) ? -term : term;
  }
  // Terms decay super-geometrically once alpha k + beta >> |z|^(1/alpha).
  return {sum, 2.0L * last};
}

template <class State, class Field>
std::vector<State> rk4(State y, Field f, double horizon, std::size_t steps, std::size_t record) {
  std::vector<State> out{y};
  const double h = horizon / static_cast<double>(steps);
  for (std::size_t i = 1; i <= steps; ++i) {
    const State k1 = f(y);
    const State k2 = f(State(y + 0.5 * h * k1));
    const State k3 = f(State(y + 0.5 * h * k2));
    const State k4 = f(State(y + h * k3));
    y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (i % record == 0) out.push_back(y);
  }
  return out;
}

// Composite Simpson rule on [a, b] with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

// Two-asset market estimated on S&P 500 and Treasury data, with
// Sigma0 = 0.25 I.
inline vmerton::WishartModel bpt10(double alpha, double gamma) {
  vmerton::WishartModel m;
  m.M = (Eigen::Matrix2d() << -1.21, 0.491, 0.3292, -1.271).finished();
  m.Q = (Eigen::Matrix2d() << 0.167, 0.033, 0.001, 0.09).finished();
  m.NNt = 10.0 * m.Q.transpose() * m.Q;
  m.rho = Eigen::Vector2d(-0.115, -0.549);
  m.v = Eigen::Vector2d(4.722, 3.317);
  m.Sigma0 = 0.25 * Eigen::Matrix2d::Identity();
  m.gamma = gamma;
  m.kernel = {vmerton::Kernel::fractional(1.0, alpha), vmerton::Kernel::fractional(1.0, alpha)};
  return m;
}

// One-asset rough Heston model of the Monte Carlo check.
inline vmerton::VectorModel rough_heston() {
  vmerton::VectorModel m;
  m.theta = Eigen::VectorXd::Constant(1, 1.0);
  m.nu = Eigen::VectorXd::Constant(1, 0.3);
  m.D = Eigen::MatrixXd::Constant(1, 1, -1.0);
  m.rho = Eigen::VectorXd::Constant(1, -0.5);
  m.V0 = Eigen::VectorXd::Constant(1, 0.04);
  m.gamma = 0.5;
  m.rate = vmerton::constant_rate(0.0);
  m.kernel = {vmerton::Kernel::fractional(1.0, 0.7)};
  return m;
}

inline vmerton::VectorModel scalar_model(double theta, double nu, double D, double rho, double V0,
                                         double gamma, vmerton::Kernel k) {
  vmerton::VectorModel m;
  m.theta = Eigen::VectorXd::Constant(1, theta);
  m.nu = Eigen::VectorXd::Constant(1, nu);
  m.D = Eigen::MatrixXd::Constant(1, 1, D);
  m.rho = Eigen::VectorXd::Constant(1, rho);
  m.V0 = Eigen::VectorXd::Constant(1, V0);
  m.gamma = gamma;
  m.kernel = {k};
  return m;
}

}  // namespace oracle
