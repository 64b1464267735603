#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "vmerton/errors.hpp"
#include "vmerton/merton.hpp"

using namespace vmerton;

namespace {

VectorRiccatiPath solve_F2(const VectorModel& m, double T, std::size_t n) {
  return solve_riccati_vector(m.kernel, build_F2(m), TimeGrid(T, n));
}

VectorRiccatiPath solve_F1(const VectorModel& m, double T, std::size_t n) {
  return solve_riccati_vector(m.kernel, build_F1(m), TimeGrid(T, n));
}

MatrixRiccatiPath solve_W(const WishartModel& m, double T, std::size_t n) {
  return solve_riccati_matrix(m.kernel, build_wishart_rhs(m), TimeGrid(T, n));
}

double sup_strategy_diff(const StrategyPath& a, const StrategyPath& b) {
  double e = 0.0;
  for (std::size_t j = 0; j < a.weights.size(); ++j) {
    e = std::max(e, (a.weights[j] - b.weights[j]).cwiseAbs().maxCoeff());
  }
  return e;
}

VectorModel two_asset_degenerate() {
  VectorModel m;
  m.theta = Eigen::Vector2d(1.0, 0.5);
  m.nu = Eigen::Vector2d(0.3, 0.5);
  m.D = (Eigen::Matrix2d() << -1.0, 0.2, 0.1, -2.0).finished();
  m.rho = Eigen::Vector2d(-0.5, -0.5);
  m.V0 = Eigen::Vector2d(0.04, 0.09);
  m.gamma = 0.5;
  m.rate = constant_rate(0.02);
  m.kernel = {Kernel::fractional(1.0, 0.7), Kernel::fractional(1.0, 0.6)};
  return m;
}

}  // namespace

TEST_CASE("zero Riccati solution gives the myopic strategy") {
  auto m = oracle::scalar_model(0.0, 0.3, -1.0, -0.5, 0.04, 0.5, Kernel::fractional(1.0, 0.7));
  const auto phi = solve_F2(m, 1.0, 100);
  const auto s = strategy_general(m, phi);
  for (std::size_t j = 0; j < s.weights.size(); ++j) {
    CHECK(s.weights[j](0) == 0.0);
    CHECK(s.hedging[j](0) == 0.0);
  }
  const auto sd = strategy_degenerate(m, solve_F1(m, 1.0, 100));
  CHECK(sd.weights.back()(0) == 0.0);

  auto g = oracle::scalar_model(1.0, 0.3, -1.0, -0.5, 0.04, 0.2, Kernel::fractional(1.0, 0.7));
  CHECK(strategy_general(g, solve_F2(g, 1.0, 100)).myopic(0) == doctest::Approx(1.25).epsilon(1e-15));
}

TEST_CASE("zero correlation removes the hedging demand") {
  auto m = two_asset_degenerate();
  m.rho.setZero();
  for (const auto& s : {strategy_general(m, solve_F2(m, 1.0, 200)),
                        strategy_degenerate(m, solve_F1(m, 1.0, 200))}) {
    for (const auto& h : s.hedging) CHECK(h.cwiseAbs().maxCoeff() == 0.0);
  }
  auto w = oracle::bpt10(0.75, 0.2);
  w.rho.setZero();
  const auto sw = strategy_wishart(w, solve_W(w, 1.0, 200));
  for (const auto& h : sw.hedging) CHECK(h.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("terminal myopia") {
  const auto w = oracle::bpt10(0.99, 0.2);
  const auto sw = strategy_wishart(w, solve_W(w, 1.0, 500));
  CHECK((sw.weights.back() - sw.myopic).cwiseAbs().maxCoeff() == 0.0);
  CHECK(sw.weights.back()(0) == doctest::Approx(5.9025).epsilon(1e-15));
  CHECK(sw.weights.back()(1) == doctest::Approx(4.14625).epsilon(1e-15));
  CHECK(sw.hedging.back().cwiseAbs().maxCoeff() == 0.0);

  const auto m = two_asset_degenerate();
  const auto sg = strategy_general(m, solve_F2(m, 1.0, 200));
  const auto sd = strategy_degenerate(m, solve_F1(m, 1.0, 200));
  CHECK((sg.weights.back() - sg.myopic).cwiseAbs().maxCoeff() == 0.0);
  CHECK((sd.weights.back() - sd.myopic).cwiseAbs().maxCoeff() == 0.0);

  for (const auto* s : {&sw, &sg, &sd}) {
    for (std::size_t j = 0; j < s->weights.size(); ++j) {
      CHECK((s->weights[j] - s->myopic - s->hedging[j]).cwiseAbs().maxCoeff() <= 1e-15);
    }
  }
}

TEST_CASE("time reversal maps node j to node n - j") {
  const auto w = oracle::bpt10(0.75, 0.2);
  const auto psi = solve_W(w, 1.0, 100);
  const auto s = strategy_wishart(w, psi);
  const Eigen::VectorXd Qr = w.Q.transpose() * w.rho;
  for (std::size_t j : {0u, 17u, 50u, 100u}) {
    const Eigen::VectorXd h = 2.0 * psi.values[100 - j] * Qr / 0.8;
    CHECK((s.hedging[j] - h).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("negative hedging demand at the published parameters") {
  for (double gamma : {0.2, 0.8}) {
    for (double alpha : {0.55, 0.75, 0.95, 0.99}) {
      CAPTURE(gamma);
      CAPTURE(alpha);
      const auto w = oracle::bpt10(alpha, gamma);
      const auto s = strategy_wishart(w, solve_W(w, 1.0, 500));
      double hmax = -1.0;
      for (const auto& h : s.hedging) hmax = std::max(hmax, h.maxCoeff());
      CHECK(hmax <= 0.0);
    }
  }
}

TEST_CASE("degenerate correlation: both constructions agree") {
  SUBCASE("rough Heston") {
    const auto m = oracle::rough_heston();
    const std::size_t n = 2000;
    const auto psi = solve_F1(m, 1.0, n);
    const auto phi = solve_F2(m, 1.0, n);
    CHECK(sup_strategy_diff(strategy_degenerate(m, psi), strategy_general(m, phi)) <= 1e-8);
    const double G = value_general(m, phi, 1.0).value;
    const double H = value_distortion(m, psi, 1.0).value;
    CHECK(std::abs(H - G) / G <= 1e-4);
  }
  SUBCASE("two assets") {
    const auto m = two_asset_degenerate();
    const std::size_t n = 2000;
    const auto psi = solve_F1(m, 1.0, n);
    const auto phi = solve_F2(m, 1.0, n);
    CHECK(sup_strategy_diff(strategy_degenerate(m, psi), strategy_general(m, phi)) <= 1e-8);
    const double G = value_general(m, phi, 1.0).value;
    const double H = value_distortion(m, psi, 1.0).value;
    CHECK(std::abs(H - G) / G <= 1e-4);
  }
  auto nd = two_asset_degenerate();
  const auto psi = solve_F1(nd, 1.0, 20);
  nd.rho(1) = -0.4;
  CHECK_THROWS_AS(strategy_degenerate(nd, psi), ModelError);
}

TEST_CASE("riskless value") {
  auto m = oracle::scalar_model(0.0, 0.3, -1.0, -0.5, 0.04, 0.5, Kernel::fractional(1.0, 0.7));
  m.rate = constant_rate(0.03);
  const auto r = value_general(m, solve_F2(m, 1.0, 200), 1.0);
  CHECK(r.value == doctest::Approx(2.0 * std::exp(0.015)).epsilon(1e-13));
  CHECK(r.value == doctest::Approx(2.030226).epsilon(1e-6));
  CHECK(r.certainty_equivalent == doctest::Approx(std::exp(0.03)).epsilon(1e-13));

  // V0 = 0 kills the variance term even with a nonzero phi.
  auto z = oracle::scalar_model(1.0, 0.3, -1.0, -0.5, 0.0, 0.5, Kernel::fractional(1.0, 0.7));
  z.rate = constant_rate(0.03);
  CHECK(value_general(z, solve_F2(z, 1.0, 200), 1.0).value == doctest::Approx(2.0 * std::exp(0.015)));

  // theta = 0, psi = 0: the distortion value collapses to the same number
  CHECK(value_distortion(m, solve_F1(m, 1.0, 200), 1.0).value == doctest::Approx(r.value).epsilon(1e-13));

  auto w = oracle::bpt10(0.75, 0.2);
  w.v.setZero();
  w.rate = constant_rate(0.03);
  const auto rw = value_wishart(w, solve_W(w, 1.0, 200), 1.0);
  CHECK(rw.value == doctest::Approx(5.0 * std::exp(0.2 * 0.03)).epsilon(1e-13));
}

TEST_CASE("Lambda = 0: distortion value is a direct integral") {
  // D = 0 and rho = 0 give Lambda = 0, xi0 = V0, and psi solves a + q psi^2.
  auto m = oracle::scalar_model(1.0, 0.3, 0.0, 0.0, 0.04, 0.5, Kernel::fractional(1.0, 0.7));
  const std::size_t n = 1000;
  const auto psi = solve_F1(m, 1.0, n);
  const double g = 0.5, c = 1.0;
  double integral = 0.0;
  const double h = 1.0 / n;
  for (std::size_t j = 0; j <= n; ++j) {
    const double p = psi.values[n - j](0);
    const double f = g / (2 * (1 - g)) * 1.0 * 0.04 + 0.5 * c * p * 0.09 * p * 0.04;
    integral += (j == 0 || j == n ? 0.5 : 1.0) * h * f;
  }
  const double expect = 2.0 * std::exp(integral);
  CHECK(value_distortion(m, psi, 1.0).value == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("homogeneity in initial wealth") {
  const auto w = oracle::bpt10(0.75, 0.2);
  const auto psi = solve_W(w, 1.0, 300);
  const double v1 = value_wishart(w, psi, 1.0).value;
  const double v2 = value_wishart(w, psi, 2.0).value;
  CHECK(v2 == doctest::Approx(std::pow(2.0, 0.2) * v1).epsilon(1e-14));

  const auto m = oracle::rough_heston();
  const auto phi = solve_F2(m, 1.0, 300);
  CHECK(value_general(m, phi, 2.0).value ==
        doctest::Approx(std::pow(2.0, 0.5) * value_general(m, phi, 1.0).value).epsilon(1e-14));
  CHECK_THROWS_AS(value_general(m, phi, 0.0), ModelError);
  CHECK_THROWS_AS(value_wishart(w, psi, -1.0), ModelError);
}

TEST_CASE("published Wishart parameters give a finite positive value") {
  const auto w = oracle::bpt10(0.75, 0.2);
  const auto r = value_wishart(w, solve_W(w, 1.0, 1000), 1.0);
  CHECK(std::isfinite(r.value));
  CHECK(r.value > 0.0);
  CHECK(r.value == doctest::Approx(std::exp(r.log_value)).epsilon(1e-14));
  CHECK(r.certainty_equivalent == doctest::Approx(std::pow(0.2 * r.value, 5.0)).epsilon(1e-12));
  // Positive integrand: a risky allocation beats holding cash.
  CHECK(r.value > 5.0);
}

TEST_CASE("one-dimensional Wishart equals the vector model") {
  // theta = v, nu = 2Q, D = 2M, V0 = Sigma0 turns f into F2 exactly.
  WishartModel w;
  w.M = Eigen::MatrixXd::Constant(1, 1, -0.6);
  w.Q = Eigen::MatrixXd::Constant(1, 1, 0.2);
  w.NNt = Eigen::MatrixXd::Zero(1, 1);
  w.rho = Eigen::VectorXd::Constant(1, -0.4);
  w.v = Eigen::VectorXd::Constant(1, 1.5);
  w.Sigma0 = Eigen::MatrixXd::Constant(1, 1, 0.09);
  w.gamma = 0.3;
  w.rate = constant_rate(0.01);
  w.kernel = {Kernel::fractional(1.0, 0.7)};

  auto m = oracle::scalar_model(1.5, 0.4, -1.2, -0.4, 0.09, 0.3, Kernel::fractional(1.0, 0.7));
  m.rate = constant_rate(0.01);

  const std::size_t n = 500;
  const auto psi = solve_W(w, 1.0, n);
  const auto phi = solve_F2(m, 1.0, n);
  CHECK(sup_strategy_diff(strategy_wishart(w, psi), strategy_general(m, phi)) <= 1e-8);
  const double vw = value_wishart(w, psi, 1.0).value;
  const double vv = value_general(m, phi, 1.0).value;
  CHECK(std::abs(vw - vv) <= 1e-8 * vv);
}

TEST_CASE("blow-up is reported with the time estimate") {
  // Large Gamma and positive drift: the Riccati solution explodes before T.
  auto w = oracle::bpt10(0.75, 0.8);
  w.M = -w.M;
  w.Q *= 5.0;
  SolverOptions o;
  o.compute_residual = false;
  const auto psi = solve_riccati_matrix(w.kernel, build_wishart_rhs(w), TimeGrid(5.0, 1000), o);
  REQUIRE(psi.blowup.has_value());
  try {
    strategy_wishart(w, psi);
    FAIL("expected BlowUpError");
  } catch (const BlowUpError& e) {
    CHECK(std::string(e.what()).find("T_max") != std::string::npos);
  }
  CHECK_THROWS_AS(value_wishart(w, psi, 1.0), BlowUpError);
}

TEST_CASE("strategy transforms") {
  const auto w = oracle::bpt10(0.75, 0.2);
  const auto s = strategy_wishart(w, solve_W(w, 1.0, 50));
  const auto t = transform_strategy(s, 2.0, 0.5);
  for (std::size_t j = 0; j < s.weights.size(); ++j) {
    CHECK((t.weights[j].array() - 2.0 * s.weights[j].array() - 0.5).abs().maxCoeff() <= 1e-14);
    CHECK((t.weights[j] - t.myopic - t.hedging[j]).cwiseAbs().maxCoeff() <= 1e-14);
  }
  const auto c = constant_strategy(TimeGrid(1.0, 10), Eigen::Vector2d(0.3, -0.1));
  CHECK(c.weights.size() == 11);
  CHECK(c.weights[7](1) == -0.1);
  CHECK(integrated_rate(constant_rate(0.05), TimeGrid(2.0, 10)) == doctest::Approx(0.1));
}
