// vmerton: configuration-driven runner for the Volterra Merton problem.

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "vmerton/config.hpp"
#include "vmerton/errors.hpp"
#include "vmerton/experiment.hpp"

namespace {

using namespace vmerton;

struct Options {
  std::string config;
  std::string preset;
  std::string out;
  std::string formats;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  bool quiet = false;
};

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int fail(int code, const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump()
            << '\n';
  return code;
}

int run_command(const std::string& command, const Options& o, CLI::App& sub) {
  ConfigOverrides ov;
  if (sub.count("--out")) ov.out = o.out;
  if (sub.count("--seed")) ov.seed = o.seed;
  if (sub.count("--steps")) ov.steps = o.steps;
  if (sub.count("--format")) ov.formats = split(o.formats);
  if (command != "sweep") ov.kind = parse_kind(command);

  ExperimentConfig cfg;
  try {
    if (!o.config.empty()) {
      cfg = load_config(o.config, ov);
    } else if (!o.preset.empty()) {
      cfg = load_preset(o.preset, ov);
    } else {
      return fail(exit_config, "config", "one of --config or --preset is required");
    }
  } catch (const std::exception& e) {
    return fail(exit_config, "config", e.what());
  }
  if (command == "sweep" && !is_study(cfg.kind)) {
    return fail(exit_config, "config",
                "kind " + to_string(cfg.kind) + " is not a sweep; set kind to a study kind");
  }

  const ExperimentReport report = execute(cfg);
  if (report.exit_code != exit_ok) {
    std::cerr << report.error << '\n';
  }
  if (!o.quiet) {
    for (const auto& path : report.outputs) std::cout << path << '\n';
    std::cout << report.metrics << '\n';
  }
  return report.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal portfolios in affine Volterra and Volterra-Wishart volatility models"};
  app.require_subcommand(0, 1);
  bool list = false;
  app.add_flag("--list-presets", list, "Print the bundled preset names");

  Options o;
  const std::pair<const char*, const char*> commands[] = {
      {"solve", "Solve the Riccati-Volterra equation and write psi"},
      {"strategy", "Optimal strategy and hedging demand"},
      {"value", "Value function and certainty equivalent"},
      {"mc-check", "Compare the analytic value with Monte Carlo"},
      {"sweep", "Run the study or parameter sweep named by the config kind"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config,-c", o.config, "YAML experiment file");
    sub->add_option("--preset,-p", o.preset, "Bundled preset name instead of a file");
    sub->add_option("--out,-o", o.out, "Output directory");
    sub->add_option("--seed", o.seed, "Monte Carlo seed");
    sub->add_option("--steps", o.steps, "Time steps on [0, T]")->check(CLI::PositiveNumber);
    sub->add_option("--format", o.formats, "Comma-separated subset of csv,svg,json");
    sub->add_flag("--quiet,-q", o.quiet, "Do not print outputs and metrics");
    sub->callback([]() {});
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : exit_config;
  }

  if (list) {
    for (const auto& name : list_presets()) std::cout << name << '\n';
    return 0;
  }
  for (CLI::App* sub : app.get_subcommands()) {
    return run_command(sub->get_name(), o, *sub);
  }
  std::cout << app.help();
  return 0;
}
