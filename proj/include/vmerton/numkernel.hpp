#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace vmerton {

struct ConstantKernel {
  double c;
  bool operator==(const ConstantKernel&) const = default;
};
struct FractionalKernel {
  double c;
  double alpha;
  bool operator==(const FractionalKernel&) const = default;
};
struct ExponentialKernel {
  double c;
  double lambda;
  bool operator==(const ExponentialKernel&) const = default;
};
struct GammaKernel {
  double c;
  double lambda;
  double alpha;
  bool operator==(const GammaKernel&) const = default;
};

/// Completely monotone convolution kernel from the four closed-form
/// families: c, c t^{a-1}/Gamma(a), c e^{-l t}, c e^{-l t} t^{a-1}/Gamma(a).
class Kernel {
 public:
  using Variant =
      std::variant<ConstantKernel, FractionalKernel, ExponentialKernel, GammaKernel>;

  static Kernel constant(double c);
  static Kernel fractional(double c, double alpha);
  static Kernel exponential(double c, double lambda);
  static Kernel gamma(double c, double lambda, double alpha);

  const Variant& variant() const noexcept { return v_; }
  double scale() const noexcept;
  /// Fractional order; 1 for the Constant and Exponential families.
  double order() const noexcept;
  /// Exponential damping; 0 for the Constant and Fractional families.
  double decay() const noexcept;
  /// K(t) is unbounded at t = 0.
  bool singular() const noexcept;
  std::string describe() const;

  /// K(t). Throws DomainError for t < 0, and for t == 0 when singular.
  double operator()(double t) const;
  /// W(u) = int_0^u K(s) ds.
  double integral(double u) const;
  /// W1(u) = int_0^u s K(s) ds.
  double first_moment(double u) const;

  bool operator==(const Kernel&) const = default;

 private:
  explicit Kernel(Variant v) : v_(v) {}
  Variant v_;
};

/// K = diag(K_1, ..., K_d).
using DiagonalKernel = std::vector<Kernel>;

double kernel_eval(const Kernel& kernel, double t);

/// Uniform grid t_j = j T / n, j = 0..n.
class TimeGrid {
 public:
  TimeGrid(double horizon, std::size_t n_steps);

  double horizon() const noexcept { return horizon_; }
  std::size_t n_steps() const noexcept { return n_steps_; }
  std::size_t size() const noexcept { return n_steps_ + 1; }
  double step() const noexcept { return horizon_ / static_cast<double>(n_steps_); }
  double node(std::size_t j) const noexcept {
    return j == n_steps_ ? horizon_ : static_cast<double>(j) * step();
  }
  std::vector<double> nodes() const;

  bool operator==(const TimeGrid&) const = default;

 private:
  double horizon_;
  std::size_t n_steps_;
};

/// Function values on every node of a grid. Value is double,
/// Eigen::VectorXd or Eigen::MatrixXd.
template <class Value>
struct Sampled {
  TimeGrid grid;
  std::vector<Value> values;

  const Value& operator[](std::size_t j) const { return values[j]; }
  Value& operator[](std::size_t j) { return values[j]; }
};

using SampledScalar = Sampled<double>;
using SampledVector = Sampled<Eigen::VectorXd>;
using SampledMatrix = Sampled<Eigen::MatrixXd>;

/// Exact kernel integrals on a uniform grid, indexed by lag m = 1..n
/// (entry m-1 covers u in [(m-1)h, mh]).
///
/// interval[m-1] = int K(u) du over the lag interval; these are both the
///   rectangle (predictor) weights and the subinterval integrals w_j.
/// newer[m-1], older[m-1] split interval[m-1] for a co-factor that is
///   linear on the interval: older multiplies the value at the earlier
///   node, newer the value at the later node. They are the product
///   trapezoidal (corrector) weights of the fractional Adams scheme.
struct KernelWeights {
  TimeGrid grid;
  std::vector<double> interval;
  std::vector<double> older;
  std::vector<double> newer;

  /// Predictor weight b_{j,n}: coefficient of f(t_j), j < n, in the
  /// rectangle approximation of int_0^{t_n} K(t_n - s) f(s) ds.
  double predictor(std::size_t j, std::size_t n) const;
  /// Corrector weight a_{j,n}: coefficient of f(t_j), j <= n, in the
  /// product trapezoidal approximation of the same integral.
  double corrector(std::size_t j, std::size_t n) const;
};

KernelWeights kernel_weights(const Kernel& kernel, const TimeGrid& grid);

/// Second-kind resolvent R with K*R = K - R, sampled on the grid from the
/// closed forms. Node 0 holds the limit R(0+), +inf for singular kernels.
SampledScalar resolvent_second_kind(const Kernel& kernel, const TimeGrid& grid);

/// R(t) at a single point t > 0.
double resolvent_second_kind_at(const Kernel& kernel, double t);

/// First-kind resolvent L(dt) = atom * delta_0(dt) + density(t) dt.
class FirstKindResolvent {
 public:
  explicit FirstKindResolvent(const Kernel& kernel);

  double atom() const noexcept { return atom_; }
  bool has_density() const noexcept;
  /// Absolutely continuous part at t > 0.
  double density(double t) const;
  /// Exponent e such that density(t) ~ t^{-e} near 0 (0 if bounded).
  double singularity() const noexcept;

 private:
  Kernel kernel_;
  double atom_ = 0.0;
};

FirstKindResolvent resolvent_first_kind(const Kernel& kernel);

/// (K * g)(t_n) on every node, g piecewise linear between nodes, using the
/// exact product-integration weights (safe for singular kernels).
SampledScalar convolve(const Kernel& kernel, const SampledScalar& g);
SampledScalar convolve(const KernelWeights& weights, const SampledScalar& g);

/// Diagonal kernel acting on vector samples: component i uses K_i.
SampledVector convolve(const DiagonalKernel& kernel, const SampledVector& g);

/// Diagonal kernel acting from the left on matrix samples: row i uses K_i.
SampledMatrix convolve(const DiagonalKernel& kernel, const SampledMatrix& g);

/// (f * g)(t_n) for two sampled functions by the trapezoidal rule.
SampledScalar convolve(const SampledScalar& f, const SampledScalar& g);

/// (f * g)(t_n) = int f(t_n - s) g(s) ds with matrix products per node.
SampledMatrix convolve(const SampledMatrix& f, const SampledMatrix& g);

/// (K * g)(t) for a function g known in closed form, by double-exponential
/// quadrature that tolerates integrable singularities of g at 0 and of K
/// at t - s = 0.
double convolve_at(const Kernel& kernel, const std::function<double(double)>& g,
                   double t);

/// (K * L)(t) = atom K(t) + int_0^t K(t - s) density(s) ds.
double convolve_at(const Kernel& kernel, const FirstKindResolvent& measure, double t);

}  // namespace vmerton
