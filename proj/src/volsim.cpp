#include "vmerton/volsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <random>
#include <string>
#include <thread>

#include <Eigen/Eigenvalues>

#include "vmerton/errors.hpp"

namespace vmerton {
namespace {

// Counter-based splitmix64: the stream for unit u starts at a hash of
// (seed, u), so any unit can be generated independently of the others.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  SplitMix64(std::uint64_t seed, std::uint64_t stream)
      : state_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return mix(state_ += 0x9e3779b97f4a7c15ULL); }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  std::uint64_t state_;
};

// Flattened lag weights: w[(m-1) * k + c] = int over lag interval m of the
// kernel that acts on entry c.
std::vector<double> lag_weights(const DiagonalKernel& kernel, const TimeGrid& grid) {
  const std::size_t d = kernel.size();
  const std::size_t n = grid.n_steps();
  std::vector<double> w(n * d);
  for (std::size_t i = 0; i < d; ++i) {
    const auto kw = kernel_weights(kernel[i], grid);
    for (std::size_t m = 0; m < n; ++m) w[m * d + i] = kw.interval[m];
  }
  return w;
}

// Per-step contribution of a strategy to log wealth:
//   log X += (excess - quad / 2) dt + diffusion.
struct WealthTerms {
  double excess = 0.0;
  double quad = 0.0;
  double diffusion = 0.0;
};

class VectorPath {
 public:
  VectorPath(const VectorModel& m, const TimeGrid& grid, const SimConfig& cfg)
      : m_(m),
        grid_(grid),
        d_(m.dim()),
        dt_(grid.step()),
        sqdt_(std::sqrt(grid.step())),
        floor_(cfg.variance_floor),
        w_(lag_weights(m.kernel, grid)),
        y_(grid.n_steps() * m.dim()),
        v_(m.dim()),
        dw1_(m.dim()),
        dw2_(m.dim()),
        corr_(m.dim()) {
    v0_.reserve(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) v0_.push_back(m.input_curve(grid.node(j)));
    for (std::size_t i = 0; i < d_; ++i) corr_[i] = std::sqrt(1.0 - m.rho(i) * m.rho(i));
  }

  static std::size_t normals_per_step(std::size_t d) { return 2 * d; }
  std::size_t normals_per_step() const { return 2 * d_; }

  void begin() { clip(v0_[0]); }

  // Increments for step j -> j+1 from standard normals scaled by sign.
  void draw(const double* z, double sign) {
    for (std::size_t i = 0; i < d_; ++i) {
      dw1_[i] = sign * sqdt_ * z[i];
      dw2_[i] = sign * sqdt_ * z[d_ + i];
    }
  }
  void set_increments(const double* row) {
    for (std::size_t i = 0; i < d_; ++i) {
      dw1_[i] = row[i];
      dw2_[i] = row[d_ + i];
    }
  }
  void store_increments(double* row) const {
    for (std::size_t i = 0; i < d_; ++i) {
      row[i] = dw1_[i];
      row[d_ + i] = dw2_[i];
    }
  }

  WealthTerms wealth(const Eigen::VectorXd& pi) const {
    WealthTerms t;
    for (std::size_t i = 0; i < d_; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      t.excess += pi(k) * v_[i] * m_.theta(k);
      t.quad += pi(k) * pi(k) * v_[i];
      t.diffusion += pi(k) * std::sqrt(v_[i]) * dw1_[i];
    }
    return t;
  }

  // Store Y_j and build V at node j + 1.
  void advance(std::size_t j) {
    double* y = &y_[j * d_];
    for (std::size_t i = 0; i < d_; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      double drift = 0.0;
      for (std::size_t l = 0; l < d_; ++l) drift += m_.D(k, static_cast<Eigen::Index>(l)) * v_[l];
      const double dB = m_.rho(k) * dw1_[i] + corr_[i] * dw2_[i];
      y[i] = drift + m_.nu(k) * std::sqrt(v_[i]) * dB / dt_;
    }
    const std::size_t n = j + 1;
    Eigen::VectorXd next = v0_[n];
    for (std::size_t s = 0; s <= j; ++s) {
      const double* ys = &y_[s * d_];
      const double* w = &w_[(n - s - 1) * d_];
      for (std::size_t i = 0; i < d_; ++i) next(static_cast<Eigen::Index>(i)) += w[i] * ys[i];
    }
    clip(next);
  }

  bool finite() const {
    return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
  }
  Eigen::MatrixXd state() const {
    return Eigen::Map<const Eigen::VectorXd>(v_.data(), static_cast<Eigen::Index>(d_));
  }
  void set_state(const Eigen::MatrixXd& s) {
    for (std::size_t i = 0; i < d_; ++i) v_[i] = s(static_cast<Eigen::Index>(i), 0);
  }
  std::size_t clips() const { return 0; }
  std::optional<double> first_clip() const { return std::nullopt; }

 private:
  void clip(const Eigen::VectorXd& raw) {
    // Full truncation: negative variance is floored before drift and sqrt.
    for (std::size_t i = 0; i < d_; ++i) v_[i] = std::max(raw(static_cast<Eigen::Index>(i)), floor_);
  }

  const VectorModel& m_;
  TimeGrid grid_;
  std::size_t d_;
  double dt_;
  double sqdt_;
  double floor_;
  std::vector<double> w_;
  std::vector<Eigen::VectorXd> v0_;
  std::vector<double> y_;
  std::vector<double> v_;
  std::vector<double> dw1_, dw2_, corr_;
};

class WishartPath {
 public:
  WishartPath(const WishartModel& m, const TimeGrid& grid, const SimConfig& cfg)
      : m_(m),
        grid_(grid),
        d_(static_cast<Eigen::Index>(m.dim())),
        k_(m.dim() * m.dim()),
        dt_(grid.step()),
        sqdt_(std::sqrt(grid.step())),
        floor_(cfg.psd_floor),
        lead_(std::sqrt(std::max(0.0, 1.0 - m.rho.squaredNorm()))),
        drift_(grid.n_steps() * k_),
        noise_(grid.n_steps() * k_),
        dW_(d_, d_),
        dB_(d_),
        eig_(d_) {
    const auto w = lag_weights(m.kernel, grid);
    const std::size_t d = m.dim();
    wsym_.resize(grid.n_steps() * k_);
    wrow_.resize(grid.n_steps() * k_);
    for (std::size_t lag = 0; lag < grid.n_steps(); ++lag) {
      for (std::size_t col = 0; col < d; ++col) {
        for (std::size_t row = 0; row < d; ++row) {
          const std::size_t c = col * d + row;
          wsym_[lag * k_ + c] = 0.5 * (w[lag * d + row] + w[lag * d + col]);
          wrow_[lag * k_ + c] = w[lag * d + row];
        }
      }
    }
  }

  static std::size_t normals_per_step(std::size_t d) { return d * d + d; }
  std::size_t normals_per_step() const { return k_ + static_cast<std::size_t>(d_); }

  void begin() {
    clips_ = 0;
    first_clip_.reset();
    clip(m_.Sigma0, 0.0);
  }

  void draw(const double* z, double sign) {
    for (std::size_t c = 0; c < k_; ++c) dW_.data()[c] = sign * sqdt_ * z[c];
    for (Eigen::Index i = 0; i < d_; ++i) dB_(i) = sign * sqdt_ * z[k_ + static_cast<std::size_t>(i)];
  }
  void set_increments(const double* row) {
    for (std::size_t c = 0; c < k_; ++c) dW_.data()[c] = row[c];
    for (Eigen::Index i = 0; i < d_; ++i) dB_(i) = row[k_ + static_cast<std::size_t>(i)];
  }
  void store_increments(double* row) const {
    for (std::size_t c = 0; c < k_; ++c) row[c] = dW_.data()[c];
    for (Eigen::Index i = 0; i < d_; ++i) row[k_ + static_cast<std::size_t>(i)] = dB_(i);
  }

  WealthTerms wealth(const Eigen::VectorXd& pi) const {
    const Eigen::VectorXd dWS = lead_ * dB_ + dW_ * m_.rho;
    WealthTerms t;
    t.excess = pi.dot(sigma_ * m_.v);
    t.quad = pi.dot(sigma_ * pi);
    t.diffusion = pi.dot(root_ * dWS);
    return t;
  }

  void advance(std::size_t j) {
    Eigen::Map<Eigen::MatrixXd> drift(&drift_[j * k_], d_, d_);
    Eigen::Map<Eigen::MatrixXd> noise(&noise_[j * k_], d_, d_);
    drift = m_.NNt + m_.M * sigma_ + sigma_ * m_.M.transpose();
    noise = root_ * dW_ * m_.Q / dt_;
    const std::size_t n = j + 1;
    Eigen::MatrixXd part = Eigen::MatrixXd::Zero(d_, d_);
    Eigen::MatrixXd side = Eigen::MatrixXd::Zero(d_, d_);
    double* p = part.data();
    double* q = side.data();
    for (std::size_t s = 0; s <= j; ++s) {
      const double* ds = &drift_[s * k_];
      const double* ns = &noise_[s * k_];
      const double* ws = &wsym_[(n - s - 1) * k_];
      const double* wr = &wrow_[(n - s - 1) * k_];
      for (std::size_t c = 0; c < k_; ++c) {
        p[c] += ws[c] * ds[c];
        q[c] += wr[c] * ns[c];
      }
    }
    Eigen::MatrixXd next = m_.Sigma0 + part + side + side.transpose();
    clip(next, grid_.node(n));
  }

  bool finite() const { return sigma_.allFinite(); }
  Eigen::MatrixXd state() const { return sigma_; }
  void set_state(const Eigen::MatrixXd& s) {
    sigma_ = s;
    eig_.compute(s);
    const Eigen::VectorXd lam = eig_.eigenvalues().cwiseMax(0.0);
    root_ = eig_.eigenvectors() * lam.cwiseSqrt().asDiagonal() * eig_.eigenvectors().transpose();
  }
  std::size_t clips() const { return clips_; }
  std::optional<double> first_clip() const { return first_clip_; }

 private:
  void clip(const Eigen::MatrixXd& raw, double t) {
    const Eigen::MatrixXd sym = 0.5 * (raw + raw.transpose());
    if (!sym.allFinite()) {
      sigma_ = sym;
      return;
    }
    eig_.compute(sym);
    Eigen::VectorXd lam = eig_.eigenvalues();
    bool clipped = false;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      if (lam(i) < floor_) {
        lam(i) = floor_;
        clipped = true;
      }
    }
    const auto& U = eig_.eigenvectors();
    if (clipped) {
      ++clips_;
      if (!first_clip_) first_clip_ = t;
      sigma_ = U * lam.asDiagonal() * U.transpose();
      sigma_ = (0.5 * (sigma_ + sigma_.transpose())).eval();
    } else {
      sigma_ = sym;
    }
    root_ = U * lam.cwiseMax(0.0).cwiseSqrt().asDiagonal() * U.transpose();
  }

  const WishartModel& m_;
  TimeGrid grid_;
  Eigen::Index d_;
  std::size_t k_;
  double dt_;
  double sqdt_;
  double floor_;
  double lead_;
  std::vector<double> wsym_, wrow_;
  std::vector<double> drift_, noise_;
  Eigen::MatrixXd dW_;
  Eigen::VectorXd dB_;
  Eigen::MatrixXd sigma_, root_;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_;
  std::size_t clips_ = 0;
  std::optional<double> first_clip_;
};

// What a unit of work (one path, or one antithetic pair) reports.
struct UnitResult {
  std::vector<double> utility;  // per strategy, averaged over the unit
  double density = 0.0;         // martingale diagnostic, averaged over the unit
};

template <class Fn>
void parallel_for(std::size_t units, std::size_t workers, Fn fn) {
  if (workers <= 1) {
    for (std::size_t u = 0; u < units; ++u) fn(u);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (units + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t hi = std::min(units, (w + 1) * chunk);
        for (std::size_t u = w * chunk; u < hi; ++u) fn(u);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

McEstimate summarize(const std::vector<double>& x, std::size_t n_paths) {
  McEstimate out;
  out.n_paths = n_paths;
  const double n = static_cast<double>(x.size());
  double sum = 0.0;
  for (double v : x) sum += v;
  out.mean = sum / n;
  if (x.size() > 1) {
    double ss = 0.0;
    for (double v : x) ss += (v - out.mean) * (v - out.mean);
    out.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

void check_strategy(const StrategyPath& s, const TimeGrid& grid, std::size_t d) {
  if (!(s.grid == grid)) throw ShapeError("strategy grid differs from simulation grid");
  if (s.dim() != d || s.weights.size() != grid.size()) {
    throw ShapeError("strategy dimension differs from model");
  }
}

void check_config(const SimConfig& cfg) {
  if (cfg.n_paths == 0) throw ModelError("simulation needs at least one path");
  if (!(cfg.psd_floor >= 0.0) || !(cfg.variance_floor >= 0.0)) {
    throw ModelError("simulation floors must be non-negative");
  }
}

// Streams paths and evaluates every strategy on each path. Antithetic
// pairs share one substream with negated normals.
template <class Path, class Model>
std::vector<UnitResult> run_units(const Model& model, const TimeGrid& grid,
                                  const std::vector<StrategyPath>& strategies,
                                  const SimConfig& cfg, double x0, std::size_t& n_paths) {
  check_config(cfg);
  if (!(x0 > 0.0)) throw ModelError("initial wealth x0 must be positive");
  for (const auto& s : strategies) check_strategy(s, grid, model.dim());
  const std::size_t per_unit = cfg.antithetic ? 2 : 1;
  const std::size_t units = (cfg.n_paths + per_unit - 1) / per_unit;
  n_paths = units * per_unit;
  const double gamma = model.gamma;
  const double rate = integrated_rate(model.rate, grid);
  const double log_x0 = std::log(x0);
  const double dt = grid.step();
  const std::size_t n = grid.n_steps();
  // The diagnostic follows the first strategy.
  std::vector<UnitResult> results(units);

  parallel_for(units, worker_count(cfg, units), [&](std::size_t u) {
    Path path(model, grid, cfg);
    SplitMix64 rng(cfg.seed, u);
    std::normal_distribution<double> normal;
    const std::size_t k = path.normals_per_step();
    std::vector<double> z(n * k);
    for (auto& v : z) v = normal(rng);

    UnitResult res{std::vector<double>(strategies.size(), 0.0), 0.0};
    for (std::size_t a = 0; a < per_unit; ++a) {
      const double sign = a == 0 ? 1.0 : -1.0;
      std::vector<double> log_x(strategies.size(), log_x0 + rate);
      double log_z = 0.0;
      path.begin();
      for (std::size_t j = 0; j < n; ++j) {
        path.draw(&z[j * k], sign);
        for (std::size_t s = 0; s < strategies.size(); ++s) {
          const auto t = path.wealth(strategies[s].weights[j]);
          log_x[s] += (t.excess - 0.5 * t.quad) * dt + t.diffusion;
          if (s == 0) log_z += gamma * t.diffusion - 0.5 * gamma * gamma * t.quad * dt;
        }
        path.advance(j);
      }
      const std::size_t index = u * per_unit + a;
      if (!path.finite()) throw SimulationError("non-finite volatility state", index);
      for (std::size_t s = 0; s < strategies.size(); ++s) {
        const double utility = std::exp(gamma * log_x[s]) / gamma;
        if (!std::isfinite(utility)) throw SimulationError("non-finite terminal utility", index);
        res.utility[s] += utility / static_cast<double>(per_unit);
      }
      res.density += std::exp(log_z) / static_cast<double>(per_unit);
    }
    results[u] = std::move(res);
  });
  return results;
}

template <class Path, class Model>
McComparison compare(const Model& model, const std::vector<StrategyPath>& strategies,
                     const SimConfig& cfg, double x0) {
  if (strategies.empty()) throw ModelError("no strategies to compare");
  require_valid(model);
  std::size_t n_paths = 0;
  const auto units = run_units<Path>(model, strategies.front().grid, strategies, cfg, x0, n_paths);
  McComparison out;
  std::vector<double> x(units.size()), diff(units.size());
  for (std::size_t s = 0; s < strategies.size(); ++s) {
    for (std::size_t u = 0; u < units.size(); ++u) {
      x[u] = units[u].utility[s];
      diff[u] = units[u].utility[s] - units[u].utility[0];
    }
    out.estimates.push_back(summarize(x, n_paths));
    out.differences.push_back(summarize(diff, n_paths));
  }
  return out;
}

template <class Path, class Model>
McEstimate diagnostic(const Model& model, const StrategyPath& strategy, const SimConfig& cfg) {
  require_valid(model);
  std::size_t n_paths = 0;
  const auto units = run_units<Path>(model, strategy.grid, {strategy}, cfg, 1.0, n_paths);
  std::vector<double> z(units.size());
  for (std::size_t u = 0; u < units.size(); ++u) z[u] = units[u].density;
  return summarize(z, n_paths);
}

template <class Path, class Model>
PathBundle simulate(const Model& model, const TimeGrid& grid, const SimConfig& cfg) {
  require_valid(model);
  check_config(cfg);
  const std::size_t per_unit = cfg.antithetic ? 2 : 1;
  const std::size_t units = (cfg.n_paths + per_unit - 1) / per_unit;
  const std::size_t n = grid.n_steps();
  const std::size_t total = units * per_unit;
  PathBundle bundle{grid, std::vector<std::vector<Eigen::MatrixXd>>(total),
                    std::vector<Eigen::MatrixXd>(total), 0, std::nullopt};
  std::vector<std::size_t> clips(total, 0);
  std::vector<std::optional<double>> first(total);

  parallel_for(units, worker_count(cfg, units), [&](std::size_t u) {
    Path path(model, grid, cfg);
    SplitMix64 rng(cfg.seed, u);
    std::normal_distribution<double> normal;
    const std::size_t k = path.normals_per_step();
    std::vector<double> z(n * k);
    for (auto& v : z) v = normal(rng);
    for (std::size_t a = 0; a < per_unit; ++a) {
      const std::size_t index = u * per_unit + a;
      auto& states = bundle.states[index];
      auto& inc = bundle.increments[index];
      states.reserve(grid.size());
      inc.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
      std::vector<double> row(k);
      path.begin();
      states.push_back(path.state());
      for (std::size_t j = 0; j < n; ++j) {
        path.draw(&z[j * k], a == 0 ? 1.0 : -1.0);
        path.store_increments(row.data());
        for (std::size_t c = 0; c < k; ++c) {
          inc(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) = row[c];
        }
        path.advance(j);
        if (!path.finite()) throw SimulationError("non-finite volatility state", index);
        states.push_back(path.state());
      }
      clips[index] = path.clips();
      first[index] = path.first_clip();
    }
  });
  for (std::size_t p = 0; p < total; ++p) {
    bundle.psd_violation_count += clips[p];
    if (first[p] && (!bundle.first_violation_time || *first[p] < *bundle.first_violation_time)) {
      bundle.first_violation_time = first[p];
    }
  }
  return bundle;
}

template <class Path, class Model>
std::vector<double> wealth_from_bundle(const Model& model, const StrategyPath& strategy,
                                       const PathBundle& bundle, double x0) {
  if (!(x0 > 0.0)) throw ModelError("initial wealth x0 must be positive");
  check_strategy(strategy, bundle.grid, model.dim());
  const auto& grid = bundle.grid;
  const double rate = integrated_rate(model.rate, grid);
  const double dt = grid.step();
  SimConfig cfg;
  Path path(model, grid, cfg);
  std::vector<double> out(bundle.n_paths());
  for (std::size_t p = 0; p < bundle.n_paths(); ++p) {
    const auto& inc = bundle.increments[p];
    if (static_cast<std::size_t>(inc.rows()) != grid.n_steps() ||
        static_cast<std::size_t>(inc.cols()) != path.normals_per_step()) {
      throw ShapeError("bundle increments do not match the model");
    }
    double log_x = std::log(x0) + rate;
    std::vector<double> row(static_cast<std::size_t>(inc.cols()));
    for (std::size_t j = 0; j < grid.n_steps(); ++j) {
      path.set_state(bundle.states[p][j]);
      for (std::size_t c = 0; c < row.size(); ++c) {
        row[c] = inc(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c));
      }
      path.set_increments(row.data());
      const auto t = path.wealth(strategy.weights[j]);
      log_x += (t.excess - 0.5 * t.quad) * dt + t.diffusion;
    }
    out[p] = std::exp(log_x);
  }
  return out;
}

}  // namespace

std::size_t worker_count(const SimConfig& cfg, std::size_t work) {
  std::size_t n = cfg.threads;
  if (n == 0) {
    if (const char* env = std::getenv("VOLTERRA_MERTON_THREADS")) {
      try {
        n = static_cast<std::size_t>(std::stoul(env));
      } catch (const std::exception&) {
        n = 0;
      }
    }
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(n, work));
}

PathBundle simulate_vector(const VectorModel& model, const TimeGrid& grid, const SimConfig& cfg) {
  return simulate<VectorPath>(model, grid, cfg);
}

PathBundle simulate_wishart(const WishartModel& model, const TimeGrid& grid,
                            const SimConfig& cfg) {
  return simulate<WishartPath>(model, grid, cfg);
}

std::vector<double> simulate_wealth(const VectorModel& model, const StrategyPath& strategy,
                                    const PathBundle& bundle, double x0) {
  return wealth_from_bundle<VectorPath>(model, strategy, bundle, x0);
}

std::vector<double> simulate_wealth(const WishartModel& model, const StrategyPath& strategy,
                                    const PathBundle& bundle, double x0) {
  return wealth_from_bundle<WishartPath>(model, strategy, bundle, x0);
}

McEstimate mc_utility(const VectorModel& model, const StrategyPath& strategy,
                      const SimConfig& cfg, double x0) {
  return compare<VectorPath>(model, {strategy}, cfg, x0).estimates.front();
}

McEstimate mc_utility(const WishartModel& model, const StrategyPath& strategy,
                      const SimConfig& cfg, double x0) {
  return compare<WishartPath>(model, {strategy}, cfg, x0).estimates.front();
}

McComparison mc_utility_crn(const VectorModel& model, const std::vector<StrategyPath>& strategies,
                            const SimConfig& cfg, double x0) {
  return compare<VectorPath>(model, strategies, cfg, x0);
}

McComparison mc_utility_crn(const WishartModel& model,
                            const std::vector<StrategyPath>& strategies, const SimConfig& cfg,
                            double x0) {
  return compare<WishartPath>(model, strategies, cfg, x0);
}

McEstimate martingale_diagnostic(const VectorModel& model, const StrategyPath& strategy,
                                 const SimConfig& cfg) {
  return diagnostic<VectorPath>(model, strategy, cfg);
}

McEstimate martingale_diagnostic(const WishartModel& model, const StrategyPath& strategy,
                                 const SimConfig& cfg) {
  return diagnostic<WishartPath>(model, strategy, cfg);
}

}  // namespace vmerton
