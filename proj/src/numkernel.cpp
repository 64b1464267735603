#include "vmerton/numkernel.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "vmerton/errors.hpp"
#include "vmerton/mittag_leffler.hpp"

namespace vmerton {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_scale(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("kernel scale c must be positive");
}
void check_order(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw DomainError("kernel order alpha must lie in (0, 1]");
  }
}
void check_decay(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw DomainError("kernel decay lambda must be non-negative");
  }
}

// (1 - e^{-x}(1 + x)) / x^2 * x^2, accurate for small x.
double one_minus_exp_linear(double x) {
  if (x < 0.1) {
    double term = x * x / 2.0;
    double sum = 0.0;
    for (int k = 2; k < 30; ++k) {
      sum += (k - 1) * term;
      term *= -x / (k + 1);
    }
    return sum;
  }
  return -std::expm1(-x) - x * std::exp(-x);
}

// Lags up to this use the closed-form antiderivatives; longer lags use
// Gauss-Legendre, where differences of W would cancel.
constexpr std::size_t kClosedFormLags = 16;

}  // namespace

Kernel Kernel::constant(double c) {
  check_scale(c);
  return Kernel(ConstantKernel{c});
}

Kernel Kernel::fractional(double c, double alpha) {
  check_scale(c);
  check_order(alpha);
  return Kernel(FractionalKernel{c, alpha});
}

Kernel Kernel::exponential(double c, double lambda) {
  check_scale(c);
  check_decay(lambda);
  return Kernel(ExponentialKernel{c, lambda});
}

Kernel Kernel::gamma(double c, double lambda, double alpha) {
  check_scale(c);
  check_decay(lambda);
  check_order(alpha);
  return Kernel(GammaKernel{c, lambda, alpha});
}

double Kernel::scale() const noexcept {
  return std::visit([](const auto& k) { return k.c; }, v_);
}

double Kernel::order() const noexcept {
  return std::visit(overloaded{[](const ConstantKernel&) { return 1.0; },
                               [](const FractionalKernel& k) { return k.alpha; },
                               [](const ExponentialKernel&) { return 1.0; },
                               [](const GammaKernel& k) { return k.alpha; }},
                    v_);
}

double Kernel::decay() const noexcept {
  return std::visit(overloaded{[](const ConstantKernel&) { return 0.0; },
                               [](const FractionalKernel&) { return 0.0; },
                               [](const ExponentialKernel& k) { return k.lambda; },
                               [](const GammaKernel& k) { return k.lambda; }},
                    v_);
}

bool Kernel::singular() const noexcept { return order() < 1.0; }

std::string Kernel::describe() const {
  std::ostringstream os;
  std::visit(overloaded{[&](const ConstantKernel& k) { os << "constant(c=" << k.c << ")"; },
                        [&](const FractionalKernel& k) {
                          os << "fractional(c=" << k.c << ", alpha=" << k.alpha << ")";
                        },
                        [&](const ExponentialKernel& k) {
                          os << "exponential(c=" << k.c << ", lambda=" << k.lambda << ")";
                        },
                        [&](const GammaKernel& k) {
                          os << "gamma(c=" << k.c << ", lambda=" << k.lambda
                             << ", alpha=" << k.alpha << ")";
                        }},
             v_);
  return os.str();
}

double Kernel::operator()(double t) const {
  if (t < 0.0 || std::isnan(t)) throw DomainError("kernel evaluated at negative time");
  if (t == 0.0 && singular()) throw DomainError("singular kernel evaluated at t = 0");
  const double c = scale();
  const double alpha = order();
  const double lambda = decay();
  double value = c;
  if (alpha < 1.0) value *= std::pow(t, alpha - 1.0) / std::tgamma(alpha);
  if (lambda > 0.0) value *= std::exp(-lambda * t);
  return value;
}

double Kernel::integral(double u) const {
  if (u <= 0.0) return 0.0;
  const double c = scale();
  const double alpha = order();
  const double lambda = decay();
  if (lambda == 0.0) return c * std::pow(u, alpha) / std::tgamma(alpha + 1.0);
  if (alpha == 1.0) return c * (-std::expm1(-lambda * u)) / lambda;
  return c * boost::math::gamma_p(alpha, lambda * u) / std::pow(lambda, alpha);
}

double Kernel::first_moment(double u) const {
  if (u <= 0.0) return 0.0;
  const double c = scale();
  const double alpha = order();
  const double lambda = decay();
  if (lambda == 0.0) {
    return c * std::pow(u, alpha + 1.0) / ((alpha + 1.0) * std::tgamma(alpha));
  }
  if (alpha == 1.0) return c * one_minus_exp_linear(lambda * u) / (lambda * lambda);
  return c * alpha * boost::math::gamma_p(alpha + 1.0, lambda * u) /
         std::pow(lambda, alpha + 1.0);
}

double kernel_eval(const Kernel& kernel, double t) { return kernel(t); }

TimeGrid::TimeGrid(double horizon, std::size_t n_steps)
    : horizon_(horizon), n_steps_(n_steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw DomainError("time grid horizon must be positive and finite");
  }
  if (n_steps == 0) throw DomainError("time grid needs at least one step");
}

std::vector<double> TimeGrid::nodes() const {
  std::vector<double> out(size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = node(j);
  return out;
}

double KernelWeights::predictor(std::size_t j, std::size_t n) const {
  if (j >= n || n > interval.size()) throw ShapeError("predictor weight index out of range");
  return interval[n - j - 1];
}

double KernelWeights::corrector(std::size_t j, std::size_t n) const {
  if (j > n || n > interval.size()) throw ShapeError("corrector weight index out of range");
  double w = 0.0;
  if (j < n) w += older[n - j - 1];
  if (j > 0) w += newer[n - j];
  return w;
}

KernelWeights kernel_weights(const Kernel& kernel, const TimeGrid& grid) {
  const std::size_t n = grid.n_steps();
  const double h = grid.step();
  KernelWeights w{grid, std::vector<double>(n), std::vector<double>(n),
                  std::vector<double>(n)};
  using Gauss = boost::math::quadrature::gauss<double, 16>;
  const auto& x = Gauss::abscissa();
  const auto& wt = Gauss::weights();

  for (std::size_t m = 1; m <= n; ++m) {
    const double lo = static_cast<double>(m - 1) * h;
    const double hi = static_cast<double>(m) * h;
    double i0 = 0.0;
    double older = 0.0;
    if (m <= kClosedFormLags) {
      i0 = kernel.integral(hi) - kernel.integral(lo);
      const double i1 = kernel.first_moment(hi) - kernel.first_moment(lo);
      older = (i1 - lo * i0) / h;
    } else {
      // Symmetric rule: abscissa() holds the non-negative half.
      const double mid = 0.5 * (lo + hi);
      const double half = 0.5 * h;
      for (std::size_t k = 0; k < x.size(); ++k) {
        for (double sgn : {1.0, -1.0}) {
          if (x[k] == 0.0 && sgn < 0.0) continue;
          const double u = mid + sgn * half * x[k];
          const double ku = kernel(u) * wt[k] * half;
          i0 += ku;
          older += ku * (u - lo) / h;
        }
      }
    }
    w.interval[m - 1] = i0;
    w.older[m - 1] = older;
    w.newer[m - 1] = i0 - older;
  }
  return w;
}

double resolvent_second_kind_at(const Kernel& kernel, double t) {
  if (!(t > 0.0)) throw DomainError("resolvent evaluated at t <= 0");
  const double c = kernel.scale();
  const double alpha = kernel.order();
  const double lambda = kernel.decay();
  // Constant/Exponential: c e^{-l t} e^{-c t};
  // Fractional/Gamma:     c e^{-l t} t^{a-1} E_{a,a}(-c t^a).
  double value = 0.0;
  if (alpha == 1.0) {
    value = c * std::exp(-c * t);
  } else {
    value = c * std::pow(t, alpha - 1.0) *
            mittag_leffler(alpha, alpha, -c * std::pow(t, alpha));
  }
  if (lambda > 0.0) value *= std::exp(-lambda * t);
  return value;
}

SampledScalar resolvent_second_kind(const Kernel& kernel, const TimeGrid& grid) {
  const double c = kernel.scale();
  const double alpha = kernel.order();
  const double lambda = kernel.decay();
  SampledScalar out{grid, std::vector<double>(grid.size())};
  out[0] = kernel.singular() ? std::numeric_limits<double>::infinity() : c;
  if (alpha == 1.0) {
    for (std::size_t j = 1; j < grid.size(); ++j) {
      const double t = grid.node(j);
      out[j] = c * std::exp(-(c + lambda) * t);
    }
    return out;
  }
  const MittagLeffler ml(alpha, alpha);
  for (std::size_t j = 1; j < grid.size(); ++j) {
    const double t = grid.node(j);
    const double ta = std::pow(t, alpha);
    out[j] = c * ta / t * ml(-c * ta) * std::exp(-lambda * t);
  }
  return out;
}

FirstKindResolvent::FirstKindResolvent(const Kernel& kernel) : kernel_(kernel) {
  // Atoms only where K(0) is finite: Constant, Exponential and their
  // alpha = 1 twins.
  if (!kernel.singular()) atom_ = 1.0 / kernel.scale();
}

bool FirstKindResolvent::has_density() const noexcept {
  return kernel_.singular() || kernel_.decay() > 0.0;
}

double FirstKindResolvent::singularity() const noexcept {
  return kernel_.singular() ? kernel_.order() : 0.0;
}

double FirstKindResolvent::density(double t) const {
  if (!(t > 0.0)) throw DomainError("first-kind resolvent density needs t > 0");
  const double c = kernel_.scale();
  const double alpha = kernel_.order();
  const double lambda = kernel_.decay();
  if (alpha == 1.0) return lambda / c;  // Constant (lambda = 0) and Exponential
  // Fractional: t^{-a} / (c Gamma(1-a)).
  // Gamma: (1/(c Gamma(1-a))) e^{-l t} d/dt (t^{-a} * e^{l t})
  //      = (1/c) [l^a P(1-a, l t) + e^{-l t} t^{-a} / Gamma(1-a)].
  double value = std::exp(-lambda * t) * std::pow(t, -alpha) / std::tgamma(1.0 - alpha);
  if (lambda > 0.0) {
    value += std::pow(lambda, alpha) * boost::math::gamma_p(1.0 - alpha, lambda * t);
  }
  return value / c;
}

FirstKindResolvent resolvent_first_kind(const Kernel& kernel) {
  return FirstKindResolvent(kernel);
}

SampledScalar convolve(const KernelWeights& weights, const SampledScalar& g) {
  if (!(weights.grid == g.grid) || g.values.size() != g.grid.size()) {
    throw ShapeError("convolve: kernel weights and samples use different grids");
  }
  SampledScalar out{g.grid, std::vector<double>(g.grid.size(), 0.0)};
  for (std::size_t n = 1; n < out.values.size(); ++n) {
    double acc = 0.0;
    for (std::size_t m = 1; m <= n; ++m) {
      acc += weights.older[m - 1] * g[n - m] + weights.newer[m - 1] * g[n - m + 1];
    }
    out[n] = acc;
  }
  return out;
}

SampledScalar convolve(const Kernel& kernel, const SampledScalar& g) {
  return convolve(kernel_weights(kernel, g.grid), g);
}

SampledVector convolve(const DiagonalKernel& kernel, const SampledVector& g) {
  const std::size_t d = kernel.size();
  for (const auto& v : g.values) {
    if (static_cast<std::size_t>(v.size()) != d) {
      throw ShapeError("convolve: vector samples do not match kernel dimension");
    }
  }
  SampledVector out{g.grid, std::vector<Eigen::VectorXd>(g.grid.size(),
                                                         Eigen::VectorXd::Zero(d))};
  for (std::size_t i = 0; i < d; ++i) {
    SampledScalar gi{g.grid, std::vector<double>(g.grid.size())};
    for (std::size_t j = 0; j < gi.values.size(); ++j) gi[j] = g[j](i);
    const auto ci = convolve(kernel[i], gi);
    for (std::size_t j = 0; j < gi.values.size(); ++j) out[j](i) = ci[j];
  }
  return out;
}

SampledMatrix convolve(const DiagonalKernel& kernel, const SampledMatrix& g) {
  const std::size_t d = kernel.size();
  if (g.values.empty()) throw ShapeError("convolve: empty samples");
  const auto cols = g.values.front().cols();
  for (const auto& v : g.values) {
    if (static_cast<std::size_t>(v.rows()) != d || v.cols() != cols) {
      throw ShapeError("convolve: matrix samples do not match kernel dimension");
    }
  }
  SampledMatrix out{g.grid, std::vector<Eigen::MatrixXd>(
                                g.grid.size(), Eigen::MatrixXd::Zero(d, cols))};
  for (std::size_t i = 0; i < d; ++i) {
    const auto weights = kernel_weights(kernel[i], g.grid);
    for (Eigen::Index k = 0; k < cols; ++k) {
      SampledScalar gik{g.grid, std::vector<double>(g.grid.size())};
      for (std::size_t j = 0; j < gik.values.size(); ++j) gik[j] = g[j](i, k);
      const auto c = convolve(weights, gik);
      for (std::size_t j = 0; j < gik.values.size(); ++j) out[j](i, k) = c[j];
    }
  }
  return out;
}

SampledScalar convolve(const SampledScalar& f, const SampledScalar& g) {
  if (!(f.grid == g.grid)) throw ShapeError("convolve: samples use different grids");
  const double h = g.grid.step();
  SampledScalar out{g.grid, std::vector<double>(g.grid.size(), 0.0)};
  for (std::size_t n = 1; n < out.values.size(); ++n) {
    double acc = 0.5 * (f[n] * g[0] + f[0] * g[n]);
    for (std::size_t j = 1; j < n; ++j) acc += f[n - j] * g[j];
    out[n] = h * acc;
  }
  return out;
}

SampledMatrix convolve(const SampledMatrix& f, const SampledMatrix& g) {
  if (!(f.grid == g.grid)) throw ShapeError("convolve: samples use different grids");
  if (f.values.empty() || g.values.empty()) throw ShapeError("convolve: empty samples");
  const auto rows = f.values.front().rows();
  const auto inner = f.values.front().cols();
  const auto cols = g.values.front().cols();
  if (g.values.front().rows() != inner) {
    throw ShapeError("convolve: incompatible matrix dimensions");
  }
  const double h = g.grid.step();
  SampledMatrix out{g.grid, std::vector<Eigen::MatrixXd>(
                                g.grid.size(), Eigen::MatrixXd::Zero(rows, cols))};
  for (std::size_t n = 1; n < out.values.size(); ++n) {
    Eigen::MatrixXd acc = 0.5 * (f[n] * g[0] + f[0] * g[n]);
    for (std::size_t j = 1; j < n; ++j) acc += f[n - j] * g[j];
    out[n] = h * acc;
  }
  return out;
}

double convolve_at(const Kernel& kernel, const std::function<double(double)>& g,
                   double t) {
  if (!(t > 0.0)) return 0.0;
  thread_local boost::math::quadrature::tanh_sinh<double> integrator;
  auto f = [&](double s, double sc) {
    // sc is the signed distance to the nearer endpoint; use it to keep
    // t - s accurate where the kernel is singular.
    const double lag = sc > 0.0 ? sc : t - s;
    const double at = sc > 0.0 ? t - sc : -sc;
    if (lag <= 0.0 || at <= 0.0) return 0.0;
    return kernel(lag) * g(at);
  };
  return integrator.integrate(f, 0.0, t, 1e-13);
}

double convolve_at(const Kernel& kernel, const FirstKindResolvent& measure, double t) {
  double value = measure.atom() * kernel(t);
  if (measure.has_density()) {
    value += convolve_at(kernel, [&](double s) { return measure.density(s); }, t);
  }
  return value;
}

}  // namespace vmerton
