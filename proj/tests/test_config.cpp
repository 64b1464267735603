#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "vmerton/config.hpp"
#include "vmerton/errors.hpp"

using namespace vmerton;

namespace {

const char* kVector = R"(name: tiny
kind: strategy
model:
  type: vector
  gamma: 0.5
  theta: [1.0, 0.5]
  nu: [0.3, 0.5]
  D: [[-1.0, 0.2], [0.1, -2.0]]
  rho: [-0.5, -0.3]
  V0: [0.04, 0.09]
  kernel: {family: fractional, alpha: 0.7}
numerics:
  T: 0.5
  n_steps: 100
)";

std::string error_of(const std::string& text) {
  try {
    load_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("bundled Wishart preset loads the published parameters verbatim") {
  const auto cfg = load_preset("bpt10_wishart");
  REQUIRE(cfg.is_wishart());
  const auto& m = std::get<WishartModel>(cfg.model);
  CHECK(m.M(0, 0) == -1.21);
  CHECK(m.M(0, 1) == 0.491);
  CHECK(m.M(1, 0) == 0.3292);
  CHECK(m.M(1, 1) == -1.271);
  CHECK(m.Q(0, 0) == 0.167);
  CHECK(m.Q(0, 1) == 0.033);
  CHECK(m.Q(1, 0) == 0.001);
  CHECK(m.Q(1, 1) == 0.09);
  CHECK(m.rho(0) == -0.115);
  CHECK(m.rho(1) == -0.549);
  CHECK(m.v(0) == 4.722);
  CHECK(m.v(1) == 3.317);
  CHECK((m.NNt - 10.0 * m.Q.transpose() * m.Q).cwiseAbs().maxCoeff() == 0.0);
  CHECK(m.gamma == 0.2);
  CHECK(m.kernel.size() == 2);
  CHECK(m.kernel[0].order() == 0.99);
  CHECK(cfg.numerics.n_steps == 1000);
  CHECK(cfg.simulation.seed == 42);
  CHECK(cfg.simulation.psd_floor == 0.0);
  CHECK(cfg.kind == ExperimentKind::strategy);
}

TEST_CASE("every bundled preset loads") {
  const auto names = list_presets();
  CHECK(names.size() >= 10);
  for (const auto& n : names) {
    CAPTURE(n);
    CHECK_NOTHROW(load_preset(n));
  }
  CHECK(std::find(names.begin(), names.end(), "regime_study_055") != names.end());
  CHECK_THROWS_AS(load_preset("no_such_preset"), ConfigError);
}

TEST_CASE("defaults") {
  const auto cfg = load_config_text(kVector);
  CHECK_FALSE(cfg.is_wishart());
  CHECK(cfg.simulation.seed == 42);
  CHECK(cfg.simulation.psd_floor == 0.0);
  CHECK(cfg.simulation.variance_floor == 0.0);
  CHECK(cfg.x0 == 1.0);
  CHECK(cfg.output.formats == std::vector<std::string>{"csv"});
  CHECK(cfg.vector_case == VectorCase::general);
  const auto& m = std::get<VectorModel>(cfg.model);
  CHECK(m.kernel[1].order() == 0.7);
  CHECK(m.rate(0.3) == 0.0);

  auto text = std::string(kVector);
  text.replace(text.find("  n_steps: 100\n"), 15, "");
  CHECK(load_config_text(text).numerics.n_steps == 1000);
}

TEST_CASE("parse and validation errors") {
  CHECK(contains(error_of(""), "empty document"));
  CHECK(contains(error_of("   \n# only a comment\n"), "empty document"));
  CHECK(contains(error_of("model: [1, 2"), "parse error"));
  CHECK(contains(error_of("- 1\n- 2\n"), "mapping"));

  auto bad_gamma = std::string(kVector);
  bad_gamma.replace(bad_gamma.find("gamma: 0.5"), 10, "gamma: 1.5");
  CHECK(contains(error_of(bad_gamma), "γ ∉ (0,1)"));

  // Several violations are listed together.
  auto many = std::string(kVector);
  many.replace(many.find("gamma: 0.5"), 10, "gamma: 1.5");
  many.replace(many.find("nu: [0.3, 0.5]"), 14, "nu: [0.3, -0.5]");
  const auto e = error_of(many);
  CHECK(contains(e, "γ ∉ (0,1)"));
  CHECK(contains(e, "nu[1]"));

  auto unknown = std::string(kVector);
  unknown.replace(unknown.find("  T: 0.5\n"), 9, "  T: 0.5\n  tolerance: 3\n");
  const auto u = error_of(unknown);
  CHECK(contains(u, "numerics.tolerance"));
  CHECK(contains(u, "unknown key"));
  CHECK(contains(u, "line 14"));

  CHECK(contains(error_of(std::string(kVector) + "kind2: x\n"), "unknown key"));
  CHECK(contains(error_of(std::string(kVector) + "x0: -1\n"), "x0"));
  auto bad_kind = std::string(kVector);
  bad_kind.replace(bad_kind.find("kind: strategy"), 14, "kind: dance");
  CHECK(contains(error_of(bad_kind), "unknown experiment kind"));
}

TEST_CASE("sweep sections") {
  const std::string base = std::string(kVector);
  auto with_kind = [&](const std::string& kind, const std::string& sweep) {
    auto t = base;
    t.replace(t.find("kind: strategy"), 14, "kind: " + kind);
    return t + sweep;
  };

  const auto ok = load_config_text(with_kind("sweep-alpha", "sweep:\n  alpha: [0.55, 0.75]\n"));
  REQUIRE(ok.sweep.has_value());
  CHECK(ok.sweep->param == "alpha");
  CHECK(ok.sweep->values == std::vector<double>{0.55, 0.75});

  CHECK(contains(error_of(with_kind("sweep-alpha", "sweep:\n  alpha: []\n")), "sweep list is empty"));
  CHECK(contains(error_of(with_kind("sweep", "sweep:\n  alpha: [0.6]\n  gamma: [0.2]\n")),
                 "multiple swept parameters"));
  CHECK(contains(error_of(with_kind("sweep-horizon", "sweep:\n  gamma: [0.2]\n")), "sweep"));
  CHECK(contains(error_of(with_kind("sweep-gamma", "sweep:\n  gamma: [0.2, 1.5]\n")), "γ ∉ (0,1)"));
  CHECK(contains(error_of(with_kind("sweep-alpha", "")), "sweep"));

  const auto generic = load_config_text(with_kind("sweep", "sweep:\n  param: T\n  values: [0.5, 2]\n"));
  CHECK(generic.sweep->param == "T");
  CHECK(study_parameter(ExperimentKind::regime_study) == "T");
  CHECK(study_parameter(ExperimentKind::volofvol_study) == "q_scale");
  CHECK(study_parameter(ExperimentKind::strategy).empty());
}

TEST_CASE("sweep parameters") {
  const auto cfg = load_preset("bpt10_wishart");
  const auto a = with_parameter(cfg, "alpha", 0.55);
  for (const auto& k : std::get<WishartModel>(a.model).kernel) CHECK(k.order() == 0.55);
  const auto a2 = with_parameter(cfg, "alpha_2", 0.6);
  CHECK(std::get<WishartModel>(a2.model).kernel[0].order() == 0.99);
  CHECK(std::get<WishartModel>(a2.model).kernel[1].order() == 0.6);
  CHECK(with_parameter(cfg, "T", 2.0).numerics.horizon == 2.0);
  CHECK(std::get<WishartModel>(with_parameter(cfg, "gamma", 0.8).model).gamma == 0.8);

  const auto q = with_parameter(cfg, "q_scale", 2.0);
  const auto& mq = std::get<WishartModel>(q.model);
  const auto& m0 = std::get<WishartModel>(cfg.model);
  CHECK((mq.Q - 2.0 * m0.Q).cwiseAbs().maxCoeff() == 0.0);
  CHECK((mq.NNt - 10.0 * mq.Q.transpose() * mq.Q).cwiseAbs().maxCoeff() <= 1e-15);

  const auto o = with_parameter(cfg, "offdiag_scale", -1.0);
  const auto& mo = std::get<WishartModel>(o.model);
  CHECK(mo.M(0, 1) == -0.491);
  CHECK(mo.M(1, 0) == -0.3292);
  CHECK(mo.M(0, 0) == -1.21);
  CHECK(mo.Q(0, 1) == -0.033);
  CHECK(mo.Q(1, 1) == 0.09);

  CHECK_THROWS_AS(with_parameter(cfg, "alpha", 1.5), ConfigError);
  CHECK_THROWS_AS(with_parameter(cfg, "gamma", 0.0), ConfigError);
  CHECK_THROWS_AS(with_parameter(cfg, "T", -1.0), ConfigError);
  CHECK_THROWS_AS(with_parameter(cfg, "alpha_3", 0.6), ConfigError);
  CHECK_THROWS_AS(with_parameter(cfg, "colour", 1.0), ConfigError);
}

TEST_CASE("preset inheritance and overrides") {
  const auto s = load_preset("sweep_alpha_gamma08");
  CHECK(s.kind == ExperimentKind::sweep_alpha);
  CHECK(std::get<WishartModel>(s.model).gamma == 0.8);
  CHECK(std::get<WishartModel>(s.model).M(1, 0) == 0.3292);

  ConfigOverrides ov;
  ov.out = "elsewhere";
  ov.seed = 7;
  ov.steps = 50;
  ov.formats = std::vector<std::string>{"csv", "json"};
  const auto c = load_preset("bpt10_wishart", ov);
  CHECK(c.output.directory == "elsewhere");
  CHECK(c.simulation.seed == 7);
  CHECK(c.numerics.n_steps == 50);
  CHECK(c.output.wants("json"));
  CHECK_FALSE(c.output.wants("svg"));

  const auto text = "preset: bpt10_wishart\nname: child\nmodel:\n  gamma: 0.8\n  kernel: {family: fractional, alpha: 0.6}\n";
  const auto child = load_config_text(text);
  CHECK(child.name == "child");
  CHECK(std::get<WishartModel>(child.model).gamma == 0.8);
  CHECK(std::get<WishartModel>(child.model).kernel[0].order() == 0.6);
  CHECK(std::get<WishartModel>(child.model).v(0) == 4.722);
}

TEST_CASE("the echo is canonical and reloads to the same config") {
  const auto a = load_preset("regime_study_055");
  const auto b = load_preset("regime_study_055");
  CHECK(a.echo == b.echo);
  CHECK(a.echo == echo_config(a));
  const auto again = load_config_text(a.echo);
  CHECK(again.echo == a.echo);

  const auto v = load_config_text(kVector);
  CHECK(load_config_text(v.echo).echo == v.echo);
}

TEST_CASE("config files on disk") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "vmerton_test_config";
  fs::create_directories(dir);
  const auto path = (dir / "tiny.yaml").string();
  std::ofstream(path) << kVector;
  CHECK(load_config(path).name == "tiny");
  std::ofstream(dir / "empty.yaml").close();
  CHECK_THROWS_AS(load_config((dir / "empty.yaml").string()), ConfigError);
  CHECK_THROWS_AS(load_config((dir / "missing.yaml").string()), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("kind names round-trip") {
  for (const char* k : {"solve", "strategy", "value", "mc-check", "sweep", "sweep-alpha", "sweep-horizon",
                        "sweep-gamma", "bl13-recovery", "regime-study", "correlation-study", "volofvol-study"}) {
    CHECK(to_string(parse_kind(k)) == k);
  }
  CHECK(is_study(ExperimentKind::correlation_study));
  CHECK_FALSE(is_study(ExperimentKind::mc_check));
}
