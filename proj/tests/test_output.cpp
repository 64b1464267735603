#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "vmerton/output.hpp"

using namespace vmerton;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST_CASE("doubles are written with 17 significant digits") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(2.0 / 3.0) == "0.66666666666666663");
  for (double x : {M_PI, 1.0 / 3.0, -4.722 / 0.8, 1e-17, 6.02214076e23}) {
    CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
  }
}

TEST_CASE("CSV tables") {
  CsvTable t({"a", "b"});
  t.add_row(std::vector<double>{1.0, 0.5});
  t.add_row(std::vector<std::string>{"x,y", "say \"hi\""});
  CHECK(t.rows() == 2);
  CHECK(t.str() == "a,b\n1,0.5\n\"x,y\",\"say \"\"hi\"\"\"\n");
}

TEST_CASE("documented headers") {
  const auto w = oracle::bpt10(0.75, 0.2);
  const TimeGrid g(1.0, 20);
  const auto psi = solve_riccati_matrix(w.kernel, build_wishart_rhs(w), g);
  const auto s = strategy_wishart(w, psi);

  const auto st = strategy_table(s);
  CHECK(first_line(st.str()) == "t,pi_1,pi_2,hedge_1,hedge_2,myopic_1,myopic_2");
  CHECK(st.rows() == 21);

  const auto rt = riccati_table(psi);
  CHECK(first_line(rt.str()) == "t,psi_11,psi_12,psi_22");

  const auto m = oracle::rough_heston();
  const auto phi = solve_riccati_vector(m.kernel, build_F2(m), g);
  CHECK(first_line(riccati_table(phi).str()) == "t,psi_1");

  const auto v = value_wishart(w, psi, 1.0);
  const auto vt = value_table(1.0, v);
  CHECK(first_line(vt.str()) == "T,value,certainty_equivalent");
  CHECK(vt.str() == "T,value,certainty_equivalent\n1," + format_double(v.value) + "," +
                        format_double(v.certainty_equivalent) + "\n");

  // The last strategy row is t = T with zero hedging demand.
  const std::string body = st.str();
  const auto last = body.substr(body.rfind('\n', body.size() - 2) + 1);
  CHECK(last.rfind("1," + format_double(s.weights.back()(0)), 0) == 0);
}

TEST_CASE("atomic writes create directories and replace files") {
  const fs::path dir = fs::temp_directory_path() / "vmerton_test_output" / "nested";
  fs::remove_all(dir.parent_path());
  const auto path = (dir / "x.csv").string();
  write_atomic(path, "first\n");
  CHECK(slurp(path) == "first\n");
  write_atomic(path, "second\n");
  CHECK(slurp(path) == "second\n");
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    (void)e;
    ++files;
  }
  CHECK(files == 1);  // no temporaries left behind
  fs::remove_all(dir.parent_path());
}

TEST_CASE("SVG line plots") {
  const auto w = oracle::bpt10(0.75, 0.2);
  const TimeGrid g(1.0, 3000);
  const auto s = strategy_wishart(w, solve_riccati_matrix(w.kernel, build_wishart_rhs(w), g));
  const auto series = hedging_series(s, "a<b ");
  REQUIRE(series.size() == 2);
  CHECK(series[0].label == "a<b hedge_1");
  CHECK(series[0].x.size() == g.size());
  const auto svg = render_svg(series, "hedging & more", "t", "hedging demand");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("hedging &amp; more") != std::string::npos);
  CHECK(svg.find("a&lt;b hedge_1") != std::string::npos);
  std::size_t lines = 0;
  for (auto p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++lines;
  CHECK(lines == 2);
  CHECK(svg.size() < 200000);  // long series are thinned
  CHECK(render_svg(series, "t", "x", "y") == render_svg(series, "t", "x", "y"));

  // Degenerate input still renders.
  CHECK(render_svg({{"flat", {0.0, 1.0}, {2.0, 2.0}}}, "flat", "x", "y").find("</svg>") != std::string::npos);
}
