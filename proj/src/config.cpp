#include "vmerton/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "vmerton/errors.hpp"

namespace vmerton {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

const std::map<std::string, ExperimentKind>& kind_table() {
  static const std::map<std::string, ExperimentKind> table{
      {"solve", ExperimentKind::solve},
      {"strategy", ExperimentKind::strategy},
      {"value", ExperimentKind::value},
      {"mc-check", ExperimentKind::mc_check},
      {"sweep", ExperimentKind::sweep},
      {"sweep-alpha", ExperimentKind::sweep_alpha},
      {"sweep-horizon", ExperimentKind::sweep_horizon},
      {"sweep-gamma", ExperimentKind::sweep_gamma},
      {"bl13-recovery", ExperimentKind::bl13_recovery},
      {"regime-study", ExperimentKind::regime_study},
      {"correlation-study", ExperimentKind::correlation_study},
      {"volofvol-study", ExperimentKind::volofvol_study},
  };
  return table;
}

// ---------------------------------------------------------------------------
// YAML -> JSON, remembering the source line of every key path.

using LineMap = std::map<std::string, int>;

std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

json scalar_to_json(const YAML::Node& node) {
  const std::string& text = node.Scalar();
  if (node.Tag() == "!") return text;  // quoted: always a string
  if (text == "true" || text == "True") return true;
  if (text == "false" || text == "False") return false;
  if (text == "~" || text == "null" || text.empty()) return nullptr;
  const char* begin = text.c_str();
  char* end = nullptr;
  const long long as_int = std::strtoll(begin, &end, 10);
  if (end != begin && *end == '\0') return as_int;
  const double as_double = std::strtod(begin, &end);
  if (end != begin && *end == '\0') return as_double;
  if (text == ".inf" || text == ".nan") return std::numeric_limits<double>::quiet_NaN();
  return text;
}

json yaml_to_json(const YAML::Node& node, const std::string& path, LineMap& lines) {
  lines.emplace(path, node.Mark().line + 1);
  switch (node.Type()) {
    case YAML::NodeType::Map: {
      json out = json::object();
      for (const auto& item : node) {
        const std::string key = item.first.as<std::string>();
        if (out.contains(key)) {
          throw ConfigError("parse error at line " + std::to_string(item.first.Mark().line + 1) +
                            ": duplicate key '" + join_path(path, key) + "'");
        }
        lines[join_path(path, key)] = item.first.Mark().line + 1;
        out[key] = yaml_to_json(item.second, join_path(path, key), lines);
      }
      return out;
    }
    case YAML::NodeType::Sequence: {
      json out = json::array();
      std::size_t i = 0;
      for (const auto& item : node) {
        out.push_back(yaml_to_json(item, path + "[" + std::to_string(i++) + "]", lines));
      }
      return out;
    }
    case YAML::NodeType::Scalar:
      return scalar_to_json(node);
    default:
      return nullptr;
  }
}

json parse_yaml(const std::string& text, const std::string& origin, LineMap& lines) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("parse error in " + origin + " at line " + std::to_string(e.mark.line + 1) +
                      ": " + e.msg);
  }
  if (!root.IsMap()) {
    throw ConfigError("parse error in " + origin +
                      (root.IsNull() ? ": empty document" : ": top level must be a mapping"));
  }
  return yaml_to_json(root, "", lines);
}

void deep_merge(json& base, const json& patch) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (it->is_object() && base.contains(it.key()) && base[it.key()].is_object()) {
      deep_merge(base[it.key()], *it);
    } else {
      base[it.key()] = *it;
    }
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json load_preset_tree(const std::string& name, int depth) {
  if (depth > 8) throw ConfigError("preset chain too deep at '" + name + "'");
  const std::string path = preset_path(name);
  LineMap ignored;
  json tree = parse_yaml(read_file(path), path, ignored);
  // A preset may itself extend another one.
  if (tree.contains("preset")) {
    if (!tree["preset"].is_string()) throw ConfigError(path + ": preset must be a name");
    json base = load_preset_tree(tree["preset"].get<std::string>(), depth + 1);
    tree.erase("preset");
    deep_merge(base, tree);
    tree = std::move(base);
  }
  if (tree.contains("model") && tree["model"].contains("preset")) {
    json base = load_preset_tree(tree["model"]["preset"].get<std::string>(), depth + 1);
    tree["model"].erase("preset");
    json model = base.value("model", json::object());
    deep_merge(model, tree["model"]);
    tree["model"] = std::move(model);
  }
  return tree;
}

// Resolves top-level and model-level preset references.
json resolve_presets(json tree) {
  if (tree.contains("preset")) {
    if (!tree["preset"].is_string()) throw ConfigError("preset: expected a preset name");
    json base = load_preset_tree(tree["preset"].get<std::string>(), 1);
    tree.erase("preset");
    deep_merge(base, tree);
    tree = std::move(base);
  }
  if (tree.contains("model") && tree["model"].is_object() && tree["model"].contains("preset")) {
    if (!tree["model"]["preset"].is_string()) {
      throw ConfigError("model.preset: expected a preset name");
    }
    json base = load_preset_tree(tree["model"]["preset"].get<std::string>(), 1);
    tree["model"].erase("preset");
    json model = base.value("model", json::object());
    deep_merge(model, tree["model"]);
    tree["model"] = std::move(model);
  }
  return tree;
}

// ---------------------------------------------------------------------------
// Typed extraction with error collection.

class Reader {
 public:
  explicit Reader(const LineMap& lines) : lines_(lines) {}

  void error(const std::string& path, const std::string& what) {
    std::string where = path;
    if (const auto it = lines_.find(path); it != lines_.end()) {
      where += " (line " + std::to_string(it->second) + ")";
    }
    errors_.push_back(where + ": " + what);
  }

  const std::vector<std::string>& errors() const { return errors_; }

  // Flags keys of `node` that are not in `known`.
  void check_keys(const json& node, const std::string& path, std::set<std::string> known) {
    if (!node.is_object()) return;
    for (auto it = node.begin(); it != node.end(); ++it) {
      if (!known.count(it.key())) error(join_path(path, it.key()), "unknown key");
    }
  }

  const json* find(const json& node, const std::string& key) const {
    if (!node.is_object()) return nullptr;
    const auto it = node.find(key);
    return it == node.end() || it->is_null() ? nullptr : &*it;
  }

  std::optional<double> number(const json& node, const std::string& path,
                               const std::string& key, bool required) {
    const json* v = find(node, key);
    const std::string p = join_path(path, key);
    if (!v) {
      if (required) error(p, "required");
      return std::nullopt;
    }
    if (!v->is_number()) {
      error(p, "expected a number");
      return std::nullopt;
    }
    return v->get<double>();
  }

  double number_or(const json& node, const std::string& path, const std::string& key,
                   double fallback) {
    return number(node, path, key, false).value_or(fallback);
  }

  std::optional<std::uint64_t> count(const json& node, const std::string& path,
                                     const std::string& key) {
    const json* v = find(node, key);
    if (!v) return std::nullopt;
    if (!v->is_number_integer() || v->get<long long>() < 0) {
      error(join_path(path, key), "expected a non-negative integer");
      return std::nullopt;
    }
    return v->get<std::uint64_t>();
  }

  std::optional<std::string> text(const json& node, const std::string& path,
                                  const std::string& key, bool required) {
    const json* v = find(node, key);
    const std::string p = join_path(path, key);
    if (!v) {
      if (required) error(p, "required");
      return std::nullopt;
    }
    if (!v->is_string()) {
      error(p, "expected a string");
      return std::nullopt;
    }
    return v->get<std::string>();
  }

  std::optional<bool> flag(const json& node, const std::string& path, const std::string& key) {
    const json* v = find(node, key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) {
      error(join_path(path, key), "expected true or false");
      return std::nullopt;
    }
    return v->get<bool>();
  }

  // A number is read as a length-1 vector.
  std::optional<Eigen::VectorXd> vector(const json& node, const std::string& path,
                                        const std::string& key, bool required) {
    const json* v = find(node, key);
    const std::string p = join_path(path, key);
    if (!v) {
      if (required) error(p, "required");
      return std::nullopt;
    }
    if (v->is_number()) return Eigen::VectorXd::Constant(1, v->get<double>());
    if (!v->is_array() || v->empty()) {
      error(p, "expected a number or a nonempty list of numbers");
      return std::nullopt;
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(v->size()));
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number()) {
        error(p + "[" + std::to_string(i) + "]", "expected a number");
        return std::nullopt;
      }
      out(static_cast<Eigen::Index>(i)) = (*v)[i].get<double>();
    }
    return out;
  }

  // A number is read as a 1 x 1 matrix; otherwise a list of equal-length rows.
  std::optional<Eigen::MatrixXd> matrix(const json& node, const std::string& path,
                                        const std::string& key, bool required) {
    const json* v = find(node, key);
    const std::string p = join_path(path, key);
    if (!v) {
      if (required) error(p, "required");
      return std::nullopt;
    }
    if (v->is_number()) return Eigen::MatrixXd::Constant(1, 1, v->get<double>());
    if (!v->is_array() || v->empty()) {
      error(p, "expected a list of rows");
      return std::nullopt;
    }
    const std::size_t rows = v->size();
    const std::size_t cols = (*v)[0].is_array() ? (*v)[0].size() : 0;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
      const json& row = (*v)[i];
      if (!row.is_array() || row.size() != cols || cols == 0) {
        error(p, "rows must be nonempty lists of equal length");
        return std::nullopt;
      }
      for (std::size_t j = 0; j < cols; ++j) {
        if (!row[j].is_number()) {
          error(p + "[" + std::to_string(i) + "][" + std::to_string(j) + "]",
                "expected a number");
          return std::nullopt;
        }
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j].get<double>();
      }
    }
    return out;
  }

 private:
  const LineMap& lines_;
  std::vector<std::string> errors_;
};

std::optional<Kernel> read_kernel(Reader& rd, const json& node, const std::string& path) {
  if (!node.is_object()) {
    rd.error(path, "expected a mapping with family, c, alpha, lambda");
    return std::nullopt;
  }
  rd.check_keys(node, path, {"family", "c", "alpha", "lambda"});
  const auto family = rd.text(node, path, "family", true);
  const double c = rd.number_or(node, path, "c", 1.0);
  if (!family) return std::nullopt;
  try {
    if (*family == "constant") return Kernel::constant(c);
    if (*family == "fractional") {
      const auto a = rd.number(node, path, "alpha", true);
      if (a) return Kernel::fractional(c, *a);
    } else if (*family == "exponential") {
      const auto l = rd.number(node, path, "lambda", true);
      if (l) return Kernel::exponential(c, *l);
    } else if (*family == "gamma") {
      const auto a = rd.number(node, path, "alpha", true);
      const auto l = rd.number(node, path, "lambda", true);
      if (a && l) return Kernel::gamma(c, *l, *a);
    } else {
      rd.error(join_path(path, "family"),
               "unknown family '" + *family + "' (constant, fractional, exponential, gamma)");
    }
  } catch (const DomainError& e) {
    rd.error(path, e.what());
  }
  return std::nullopt;
}

// A single mapping applies to every component; a list gives one per component.
DiagonalKernel read_kernels(Reader& rd, const json& model, std::size_t d) {
  const json* node = rd.find(model, "kernel");
  if (!node) {
    rd.error("model.kernel", "required");
    return {};
  }
  DiagonalKernel out;
  if (node->is_array()) {
    if (node->size() != d) {
      rd.error("model.kernel", "expected " + std::to_string(d) + " kernels, got " +
                                   std::to_string(node->size()));
      return {};
    }
    for (std::size_t i = 0; i < d; ++i) {
      auto k = read_kernel(rd, (*node)[i], "model.kernel[" + std::to_string(i) + "]");
      if (!k) return {};
      out.push_back(*k);
    }
    return out;
  }
  auto k = read_kernel(rd, *node, "model.kernel");
  if (!k) return {};
  return DiagonalKernel(d, *k);
}

json kernel_to_json(const Kernel& k) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ConstantKernel>) {
          return {{"family", "constant"}, {"c", v.c}};
        } else if constexpr (std::is_same_v<T, FractionalKernel>) {
          return {{"family", "fractional"}, {"c", v.c}, {"alpha", v.alpha}};
        } else if constexpr (std::is_same_v<T, ExponentialKernel>) {
          return {{"family", "exponential"}, {"c", v.c}, {"lambda", v.lambda}};
        } else {
          return {{"family", "gamma"}, {"c", v.c}, {"lambda", v.lambda}, {"alpha", v.alpha}};
        }
      },
      k.variant());
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

json kernels_to_json(const DiagonalKernel& kernel) {
  const bool uniform =
      std::all_of(kernel.begin(), kernel.end(), [&](const Kernel& k) { return k == kernel[0]; });
  if (uniform && !kernel.empty()) return kernel_to_json(kernel[0]);
  json out = json::array();
  for (const auto& k : kernel) out.push_back(kernel_to_json(k));
  return out;
}

VectorModel read_vector_model(Reader& rd, const json& m, ExperimentConfig& cfg) {
  const std::string p = "model";
  rd.check_keys(m, p, {"type", "case", "theta", "nu", "D", "rho", "V0", "b0", "gamma", "r",
                       "kernel"});
  VectorModel model;
  model.theta = rd.vector(m, p, "theta", true).value_or(Eigen::VectorXd());
  model.nu = rd.vector(m, p, "nu", true).value_or(Eigen::VectorXd());
  model.D = rd.matrix(m, p, "D", true).value_or(Eigen::MatrixXd());
  model.rho = rd.vector(m, p, "rho", true).value_or(Eigen::VectorXd());
  model.V0 = rd.vector(m, p, "V0", true).value_or(Eigen::VectorXd());
  model.b0 = rd.vector(m, p, "b0", false).value_or(Eigen::VectorXd());
  model.gamma = rd.number(m, p, "gamma", true).value_or(0.5);
  cfg.r = rd.number_or(m, p, "r", 0.0);
  model.rate = constant_rate(cfg.r);
  model.kernel = read_kernels(rd, m, model.dim());
  if (const auto c = rd.text(m, p, "case", false)) {
    if (*c == "general") {
      cfg.vector_case = VectorCase::general;
    } else if (*c == "degenerate") {
      cfg.vector_case = VectorCase::degenerate;
    } else {
      rd.error("model.case", "expected general or degenerate");
    }
  }
  return model;
}

WishartModel read_wishart_model(Reader& rd, const json& m, ExperimentConfig& cfg) {
  const std::string p = "model";
  rd.check_keys(m, p, {"type", "M", "Q", "NNt", "NNt_scale", "rho", "v", "Sigma0", "gamma", "r",
                       "kernel"});
  WishartModel model;
  model.M = rd.matrix(m, p, "M", true).value_or(Eigen::MatrixXd());
  model.Q = rd.matrix(m, p, "Q", true).value_or(Eigen::MatrixXd());
  model.rho = rd.vector(m, p, "rho", true).value_or(Eigen::VectorXd());
  model.v = rd.vector(m, p, "v", true).value_or(Eigen::VectorXd());
  model.Sigma0 = rd.matrix(m, p, "Sigma0", true).value_or(Eigen::MatrixXd());
  model.gamma = rd.number(m, p, "gamma", true).value_or(0.5);
  cfg.r = rd.number_or(m, p, "r", 0.0);
  model.rate = constant_rate(cfg.r);
  const auto nnt = rd.matrix(m, p, "NNt", false);
  const auto scale = rd.number(m, p, "NNt_scale", false);
  if (nnt && scale) {
    rd.error("model.NNt", "give either NNt or NNt_scale, not both");
  } else if (nnt) {
    model.NNt = *nnt;
  } else if (scale) {
    cfg.nnt_scale = *scale;
    model.NNt = *scale * model.Q.transpose() * model.Q;
  } else {
    rd.error("model.NNt", "required (or NNt_scale for NN^T = s Q^T Q)");
  }
  model.kernel = read_kernels(rd, m, model.dim());
  return model;
}

std::optional<SweepSpec> read_sweep(Reader& rd, const json& root) {
  const json* node = rd.find(root, "sweep");
  if (!node) return std::nullopt;
  if (!node->is_object()) {
    rd.error("sweep", "expected a mapping with param and values");
    return std::nullopt;
  }
  // Either {param: p, values: [...]} or the shorthand {p: [...]}.
  std::vector<SweepSpec> found;
  if (node->contains("param") || node->contains("values")) {
    SweepSpec s;
    s.param = rd.text(*node, "sweep", "param", true).value_or("");
    if (const auto v = rd.vector(*node, "sweep", "values", false)) {
      s.values.assign(v->data(), v->data() + v->size());
    } else if (!rd.find(*node, "values")) {
      rd.error("sweep.values", "required");
    }
    found.push_back(std::move(s));
  }
  for (auto it = node->begin(); it != node->end(); ++it) {
    if (it.key() == "param" || it.key() == "values") continue;
    SweepSpec s;
    s.param = it.key();
    if (it->is_array()) {
      for (std::size_t i = 0; i < it->size(); ++i) {
        if ((*it)[i].is_number()) {
          s.values.push_back((*it)[i].get<double>());
        } else {
          rd.error("sweep." + it.key(), "expected a list of numbers");
        }
      }
    } else {
      rd.error("sweep." + it.key(), "expected a list of numbers");
    }
    found.push_back(std::move(s));
  }
  if (found.size() > 1) {
    std::string names;
    for (const auto& s : found) names += (names.empty() ? "" : ", ") + s.param;
    rd.error("sweep", "multiple swept parameters (" + names + "); exactly one is allowed");
    return std::nullopt;
  }
  if (found.empty()) {
    rd.error("sweep", "no swept parameter");
    return std::nullopt;
  }
  if (found[0].values.empty()) rd.error("sweep.values", "sweep list is empty");
  return found[0];
}

void apply_overrides(json& tree, const ConfigOverrides& o) {
  if (o.kind) tree["kind"] = to_string(*o.kind);
  if (o.out) tree["output"]["directory"] = *o.out;
  if (o.formats) tree["output"]["formats"] = *o.formats;
  if (o.seed) tree["simulation"]["seed"] = *o.seed;
  if (o.steps) tree["numerics"]["n_steps"] = *o.steps;
}

const std::set<std::string> kFormats{"csv", "svg", "json"};

ExperimentConfig build_config(const json& tree, const LineMap& lines) {
  Reader rd(lines);
  ExperimentConfig cfg;
  rd.check_keys(tree, "", {"name", "kind", "description", "x0", "model", "numerics", "simulation",
                           "output", "sweep"});
  cfg.name = rd.text(tree, "", "name", false).value_or("experiment");
  if (const auto k = rd.text(tree, "", "kind", true)) {
    try {
      cfg.kind = parse_kind(*k);
    } catch (const ConfigError& e) {
      rd.error("kind", e.what());
    }
  }
  cfg.x0 = rd.number_or(tree, "", "x0", 1.0);
  if (!(cfg.x0 > 0.0)) rd.error("x0", "initial wealth must be positive");

  const json* model = rd.find(tree, "model");
  bool model_ok = false;
  if (!model || !model->is_object()) {
    rd.error("model", "required: exactly one model section");
  } else {
    const auto type = rd.text(*model, "model", "type", true);
    if (type == "vector") {
      cfg.model = read_vector_model(rd, *model, cfg);
      model_ok = true;
    } else if (type == "wishart") {
      cfg.model = read_wishart_model(rd, *model, cfg);
      model_ok = true;
    } else if (type) {
      rd.error("model.type", "expected vector or wishart");
    }
  }

  const json empty = json::object();
  const json& num = tree.contains("numerics") ? tree["numerics"] : empty;
  rd.check_keys(num, "numerics", {"T", "n_steps", "blowup_threshold"});
  cfg.numerics.horizon = rd.number_or(num, "numerics", "T", 1.0);
  cfg.numerics.n_steps = rd.count(num, "numerics", "n_steps").value_or(1000);
  cfg.numerics.blowup_threshold = rd.number_or(num, "numerics", "blowup_threshold", 1e8);
  if (!(cfg.numerics.horizon > 0.0)) rd.error("numerics.T", "horizon must be positive");
  if (cfg.numerics.n_steps == 0) rd.error("numerics.n_steps", "must be positive");
  if (!(cfg.numerics.blowup_threshold > 0.0)) {
    rd.error("numerics.blowup_threshold", "must be positive");
  }

  const json& sim = tree.contains("simulation") ? tree["simulation"] : empty;
  rd.check_keys(sim, "simulation",
                {"n_paths", "seed", "psd_floor", "variance_floor", "antithetic", "threads"});
  cfg.simulation.n_paths = rd.count(sim, "simulation", "n_paths").value_or(10000);
  cfg.simulation.seed = rd.count(sim, "simulation", "seed").value_or(42);
  cfg.simulation.psd_floor = rd.number_or(sim, "simulation", "psd_floor", 0.0);
  cfg.simulation.variance_floor = rd.number_or(sim, "simulation", "variance_floor", 0.0);
  cfg.simulation.antithetic = rd.flag(sim, "simulation", "antithetic").value_or(true);
  cfg.simulation.threads = rd.count(sim, "simulation", "threads").value_or(0);
  if (cfg.simulation.n_paths == 0) rd.error("simulation.n_paths", "must be positive");
  if (cfg.simulation.psd_floor < 0.0) rd.error("simulation.psd_floor", "must be >= 0");
  if (cfg.simulation.variance_floor < 0.0) rd.error("simulation.variance_floor", "must be >= 0");

  const json& out = tree.contains("output") ? tree["output"] : empty;
  rd.check_keys(out, "output", {"directory", "formats"});
  cfg.output.directory = rd.text(out, "output", "directory", false).value_or("out");
  if (const json* f = rd.find(out, "formats")) {
    std::vector<std::string> formats;
    if (f->is_string()) {
      std::stringstream ss(f->get<std::string>());
      for (std::string item; std::getline(ss, item, ',');) formats.push_back(item);
    } else if (f->is_array()) {
      for (const auto& item : *f) {
        if (item.is_string()) formats.push_back(item.get<std::string>());
      }
    }
    for (const auto& fmt : formats) {
      if (!kFormats.count(fmt)) rd.error("output.formats", "unknown format '" + fmt + "'");
    }
    if (formats.empty()) rd.error("output.formats", "expected a subset of csv, svg, json");
    std::sort(formats.begin(), formats.end());
    formats.erase(std::unique(formats.begin(), formats.end()), formats.end());
    cfg.output.formats = formats;
  }

  cfg.sweep = read_sweep(rd, tree);
  const std::string fixed = study_parameter(cfg.kind);
  if (is_study(cfg.kind)) {
    if (!cfg.sweep) {
      rd.error("sweep", "required for kind " + to_string(cfg.kind));
    } else if (!fixed.empty() && cfg.sweep->param != fixed) {
      rd.error("sweep.param", "kind " + to_string(cfg.kind) + " sweeps '" + fixed + "', not '" +
                                  cfg.sweep->param + "'");
    }
  }

  if (model_ok) {
    const auto violations = std::visit([](const auto& m) { return validate(m); }, cfg.model);
    for (const auto& v : violations) rd.error("model." + v.field, v.condition);
    if (!cfg.is_wishart() && cfg.vector_case == VectorCase::degenerate &&
        !std::get<VectorModel>(cfg.model).degenerate()) {
      rd.error("model.case", "degenerate case needs equal correlations rho_i");
    }
    // Every sweep point must give a valid model too.
    if (cfg.sweep && rd.errors().empty()) {
      for (double value : cfg.sweep->values) {
        try {
          (void)with_parameter(cfg, cfg.sweep->param, value);
        } catch (const std::exception& e) {
          rd.error("sweep", e.what());
          break;
        }
      }
    }
  }

  if (!rd.errors().empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : rd.errors()) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  cfg.echo = echo_config(cfg);
  return cfg;
}

ExperimentConfig load_tree(json tree, const LineMap& lines, const ConfigOverrides& overrides) {
  tree = resolve_presets(std::move(tree));
  apply_overrides(tree, overrides);
  return build_config(tree, lines);
}

void scale_offdiagonal(Eigen::MatrixXd& m, double s) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (i != j) m(i, j) *= s;
    }
  }
}

Kernel with_alpha(const Kernel& k, double alpha) {
  return std::visit(
      [&](const auto& v) -> Kernel {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, FractionalKernel>) {
          return Kernel::fractional(v.c, alpha);
        } else if constexpr (std::is_same_v<T, GammaKernel>) {
          return Kernel::gamma(v.c, v.lambda, alpha);
        } else {
          throw ConfigError("alpha sweep needs fractional or gamma kernels, got " + k.describe());
        }
      },
      k.variant());
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  for (const auto& [name, k] : kind_table()) {
    if (k == kind) return name;
  }
  return "unknown";
}

ExperimentKind parse_kind(const std::string& text) {
  const auto it = kind_table().find(text);
  if (it == kind_table().end()) {
    std::string names;
    for (const auto& [name, k] : kind_table()) names += (names.empty() ? "" : ", ") + name;
    throw ConfigError("unknown experiment kind '" + text + "' (" + names + ")");
  }
  return it->second;
}

bool is_study(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::solve:
    case ExperimentKind::strategy:
    case ExperimentKind::value:
    case ExperimentKind::mc_check:
      return false;
    default:
      return true;
  }
}

std::string study_parameter(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::sweep_alpha: return "alpha";
    case ExperimentKind::sweep_horizon: return "T";
    case ExperimentKind::sweep_gamma: return "gamma";
    case ExperimentKind::bl13_recovery: return "gamma";
    case ExperimentKind::regime_study: return "T";
    case ExperimentKind::correlation_study: return "offdiag_scale";
    case ExperimentKind::volofvol_study: return "q_scale";
    default: return "";
  }
}

bool OutputConfig::wants(const std::string& format) const {
  return std::find(formats.begin(), formats.end(), format) != formats.end();
}

std::string preset_directory() {
  if (const char* env = std::getenv("VMERTON_PRESET_DIR"); env && *env) return env;
#ifdef VMERTON_PRESET_DIR
  return VMERTON_PRESET_DIR;
#else
  return "presets";
#endif
}

std::vector<std::string> list_presets() {
  std::vector<std::string> names;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(preset_directory(), ec)) {
    if (entry.path().extension() == ".yaml") names.push_back(entry.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::string preset_path(const std::string& name) {
  const fs::path path = fs::path(preset_directory()) / (name + ".yaml");
  if (!fs::exists(path)) {
    std::string names;
    for (const auto& n : list_presets()) names += (names.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "' (available: " + names + ")");
  }
  return path.string();
}

ExperimentConfig load_config_text(const std::string& text, const ConfigOverrides& overrides,
                                  const std::string& origin) {
  LineMap lines;
  json tree = parse_yaml(text, origin, lines);
  return load_tree(std::move(tree), lines, overrides);
}

ExperimentConfig load_config(const std::string& path, const ConfigOverrides& overrides) {
  return load_config_text(read_file(path), overrides, path);
}

ExperimentConfig load_preset(const std::string& name, const ConfigOverrides& overrides) {
  return load_tree(load_preset_tree(name, 1), {}, overrides);
}

std::string echo_config(const ExperimentConfig& cfg) {
  json model;
  if (cfg.is_wishart()) {
    const auto& m = std::get<WishartModel>(cfg.model);
    model = {{"type", "wishart"}, {"M", matrix_to_json(m.M)},   {"Q", matrix_to_json(m.Q)},
             {"rho", vector_to_json(m.rho)}, {"v", vector_to_json(m.v)},
             {"Sigma0", matrix_to_json(m.Sigma0)}, {"gamma", m.gamma}, {"r", cfg.r},
             {"kernel", kernels_to_json(m.kernel)}};
    if (cfg.nnt_scale) {
      model["NNt_scale"] = *cfg.nnt_scale;
    } else {
      model["NNt"] = matrix_to_json(m.NNt);
    }
  } else {
    const auto& m = std::get<VectorModel>(cfg.model);
    model = {{"type", "vector"},
             {"case", cfg.vector_case == VectorCase::general ? "general" : "degenerate"},
             {"theta", vector_to_json(m.theta)},
             {"nu", vector_to_json(m.nu)},
             {"D", matrix_to_json(m.D)},
             {"rho", vector_to_json(m.rho)},
             {"V0", vector_to_json(m.V0)},
             {"gamma", m.gamma},
             {"r", cfg.r},
             {"kernel", kernels_to_json(m.kernel)}};
    if (m.b0.size() > 0) model["b0"] = vector_to_json(m.b0);
  }
  json root = {
      {"name", cfg.name},
      {"kind", to_string(cfg.kind)},
      {"x0", cfg.x0},
      {"model", model},
      {"numerics",
       {{"T", cfg.numerics.horizon},
        {"n_steps", cfg.numerics.n_steps},
        {"blowup_threshold", cfg.numerics.blowup_threshold}}},
      {"simulation",
       {{"n_paths", cfg.simulation.n_paths},
        {"seed", cfg.simulation.seed},
        {"psd_floor", cfg.simulation.psd_floor},
        {"variance_floor", cfg.simulation.variance_floor},
        {"antithetic", cfg.simulation.antithetic},
        {"threads", cfg.simulation.threads}}},
      {"output", {{"directory", cfg.output.directory}, {"formats", cfg.output.formats}}},
  };
  if (cfg.sweep) root["sweep"] = {{"param", cfg.sweep->param}, {"values", cfg.sweep->values}};
  return root.dump(2);
}

ExperimentConfig with_parameter(const ExperimentConfig& config, const std::string& param,
                                double value) {
  ExperimentConfig out = config;
  if (!std::isfinite(value)) throw ConfigError(param + ": sweep value must be finite");
  auto kernels = [&]() -> DiagonalKernel& {
    return std::visit([](auto& m) -> DiagonalKernel& { return m.kernel; }, out.model);
  };
  if (param == "T") {
    if (!(value > 0.0)) throw ConfigError("T: horizon must be positive");
    out.numerics.horizon = value;
  } else if (param == "gamma") {
    std::visit([&](auto& m) { m.gamma = value; }, out.model);
  } else if (param == "alpha") {
    try {
      for (auto& k : kernels()) k = with_alpha(k, value);
    } catch (const DomainError& e) {
      throw ConfigError("alpha = " + std::to_string(value) + ": " + e.what());
    }
  } else if (param.rfind("alpha_", 0) == 0) {
    std::size_t idx = 0;
    try {
      idx = std::stoul(param.substr(6));
    } catch (const std::exception&) {
      throw ConfigError("unknown sweep parameter '" + param + "'");
    }
    auto& ks = kernels();
    if (idx == 0 || idx > ks.size()) {
      throw ConfigError(param + ": kernel index out of range 1.." + std::to_string(ks.size()));
    }
    try {
      ks[idx - 1] = with_alpha(ks[idx - 1], value);
    } catch (const DomainError& e) {
      throw ConfigError(param + " = " + std::to_string(value) + ": " + e.what());
    }
  } else if (param == "q_scale" || param == "offdiag_scale") {
    if (!out.is_wishart()) throw ConfigError(param + " applies to the wishart model only");
    auto& m = std::get<WishartModel>(out.model);
    if (param == "q_scale") {
      m.Q *= value;
    } else {
      scale_offdiagonal(m.M, value);
      scale_offdiagonal(m.Q, value);
    }
    if (out.nnt_scale) m.NNt = *out.nnt_scale * m.Q.transpose() * m.Q;
  } else {
    throw ConfigError("unknown sweep parameter '" + param +
                      "' (alpha, alpha_<k>, T, gamma, q_scale, offdiag_scale)");
  }
  const auto violations = std::visit([](const auto& m) { return validate(m); }, out.model);
  if (!violations.empty()) {
    std::string msg = param + " = " + std::to_string(value) + " gives an invalid model:";
    for (const auto& v : violations) msg += " " + v.message() + ";";
    throw ConfigError(msg);
  }
  out.echo = echo_config(out);
  return out;
}

}  // namespace vmerton
