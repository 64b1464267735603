#include "vmerton/output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <unistd.h>

#include "vmerton/errors.hpp"

namespace vmerton {
namespace {

namespace fs = std::filesystem;

std::string csv_field(std::string s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed(double x, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

// Round step 1, 2 or 5 times a power of ten giving about `target` ticks.
double tick_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  return (f < 1.5 ? 1.0 : f < 3.5 ? 2.0 : f < 7.5 ? 5.0 : 10.0) * mag;
}

std::string tick_label(double x, double step) {
  const int digits = std::max(0, static_cast<int>(-std::floor(std::log10(step) + 1e-9)));
  if (std::abs(x) < 0.5 * step) x = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};
constexpr const char* kDash[] = {"", "6,3", "2,2", "8,3,2,3"};

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void CsvTable::add_row(const std::vector<double>& row) {
  std::vector<std::string> cells;
  cells.reserve(row.size());
  for (double x : row) cells.push_back(format_double(x));
  add_row(std::move(cells));
}

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != header_.size()) throw ShapeError("CSV row width differs from header");
  rows_.push_back(std::move(row));
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += csv_field(cells[i]);
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

void write_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

CsvTable strategy_table(const StrategyPath& s) {
  const std::size_t d = s.dim();
  std::vector<std::string> header{"t"};
  for (const char* part : {"pi_", "hedge_", "myopic_"}) {
    for (std::size_t i = 1; i <= d; ++i) header.push_back(part + std::to_string(i));
  }
  CsvTable table(std::move(header));
  std::vector<double> row(1 + 3 * d);
  for (std::size_t j = 0; j < s.weights.size(); ++j) {
    row[0] = s.grid.node(j);
    for (std::size_t i = 0; i < d; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      row[1 + i] = s.weights[j](k);
      row[1 + d + i] = s.hedging[j](k);
      row[1 + 2 * d + i] = s.myopic(k);
    }
    table.add_row(row);
  }
  return table;
}

CsvTable riccati_table(const VectorRiccatiPath& path) {
  const std::size_t d = path.values.empty() ? 0 : static_cast<std::size_t>(path.values[0].size());
  std::vector<std::string> header{"t"};
  for (std::size_t i = 1; i <= d; ++i) header.push_back("psi_" + std::to_string(i));
  CsvTable table(std::move(header));
  std::vector<double> row(1 + d);
  for (std::size_t j = 0; j < path.values.size(); ++j) {
    row[0] = path.grid.node(j);
    for (std::size_t i = 0; i < d; ++i) row[1 + i] = path.values[j](static_cast<Eigen::Index>(i));
    table.add_row(row);
  }
  return table;
}

CsvTable riccati_table(const MatrixRiccatiPath& path) {
  const auto d = path.values.empty() ? 0 : path.values[0].rows();
  std::vector<std::string> header{"t"};
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index k = i; k < d; ++k) {
      header.push_back("psi_" + std::to_string(i + 1) + std::to_string(k + 1));
    }
  }
  CsvTable table(std::move(header));
  for (std::size_t j = 0; j < path.values.size(); ++j) {
    std::vector<double> row{path.grid.node(j)};
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index k = i; k < d; ++k) row.push_back(path.values[j](i, k));
    }
    table.add_row(row);
  }
  return table;
}

CsvTable value_table(double horizon, const ValueReport& value) {
  CsvTable table({"T", "value", "certainty_equivalent"});
  table.add_row(std::vector<double>{horizon, value.value, value.certainty_equivalent});
  return table;
}

std::vector<Series> hedging_series(const StrategyPath& s, const std::string& prefix) {
  std::vector<Series> out;
  for (std::size_t i = 0; i < s.dim(); ++i) {
    Series series{prefix + "hedge_" + std::to_string(i + 1), {}, {}};
    for (std::size_t j = 0; j < s.hedging.size(); ++j) {
      series.x.push_back(s.grid.node(j));
      series.y.push_back(s.hedging[j](static_cast<Eigen::Index>(i)));
    }
    out.push_back(std::move(series));
  }
  return out;
}

std::string render_svg(const std::vector<Series>& series, const std::string& title,
                       const std::string& x_label, const std::string& y_label) {
  const double width = 760, height = 460;
  const double left = 80, right = 190, top = 44, bottom = 56;
  const double pw = width - left - right, ph = height - top - bottom;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax - xmin <= 0) xmax = xmin + 1;
  if (ymax - ymin <= 1e-300) {
    const double pad = std::max(1e-3, std::abs(ymin) * 0.1);
    ymin -= pad;
    ymax += pad;
  }
  const double ystep = tick_step(ymax - ymin, 6);
  ymin = std::floor(ymin / ystep) * ystep;
  ymax = std::ceil(ymax / ystep) * ystep;
  const double xstep = tick_step(xmax - xmin, 8);

  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height
     << "\" font-family=\"Helvetica, Arial, sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << left + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
     << xml_escape(title) << "</text>\n";

  os << "<g stroke=\"#e5e5e5\" stroke-width=\"1\">\n";
  for (double y = ymin; y <= ymax + 0.5 * ystep; y += ystep) {
    os << "<line x1=\"" << fixed(left) << "\" x2=\"" << fixed(left + pw) << "\" y1=\""
       << fixed(py(y)) << "\" y2=\"" << fixed(py(y)) << "\"/>\n";
  }
  os << "</g>\n<g fill=\"#333\">\n";
  for (double y = ymin; y <= ymax + 0.5 * ystep; y += ystep) {
    os << "<text x=\"" << fixed(left - 8) << "\" y=\"" << fixed(py(y) + 4)
       << "\" text-anchor=\"end\">" << tick_label(y, ystep) << "</text>\n";
  }
  for (double x = std::ceil(xmin / xstep) * xstep; x <= xmax + 1e-9 * xstep; x += xstep) {
    os << "<line x1=\"" << fixed(px(x)) << "\" x2=\"" << fixed(px(x)) << "\" y1=\""
       << fixed(top + ph) << "\" y2=\"" << fixed(top + ph + 5) << "\" stroke=\"#333\"/>\n"
       << "<text x=\"" << fixed(px(x)) << "\" y=\"" << fixed(top + ph + 19)
       << "\" text-anchor=\"middle\">" << tick_label(x, xstep) << "</text>\n";
  }
  os << "</g>\n"
     << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"#333\"/>\n"
     << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 14
     << "\" text-anchor=\"middle\">" << xml_escape(x_label) << "</text>\n"
     << "<text transform=\"translate(20," << top + ph / 2
     << ") rotate(-90)\" text-anchor=\"middle\">" << xml_escape(y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    const char* dash = kDash[(k / std::size(kPalette)) % std::size(kDash)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\"";
    if (*dash) os << " stroke-dasharray=\"" << dash << '"';
    os << " points=\"";
    // At most ~1000 vertices per curve; the plot is 490 px wide.
    const std::size_t n = std::min(s.x.size(), s.y.size());
    const std::size_t stride = std::max<std::size_t>(1, n / 1000);
    for (std::size_t i = 0; i < n; i += stride) {
      if (!std::isfinite(s.y[i])) continue;
      os << fixed(px(s.x[i])) << ',' << fixed(py(s.y[i])) << ' ';
    }
    if (n > 0 && (n - 1) % stride != 0 && std::isfinite(s.y[n - 1])) {
      os << fixed(px(s.x[n - 1])) << ',' << fixed(py(s.y[n - 1]));
    }
    os << "\"/>\n";
    const double ly = top + 14 + 18 * static_cast<double>(k);
    const double lx = left + pw + 14;
    os << "<line x1=\"" << lx << "\" x2=\"" << lx + 26 << "\" y1=\"" << ly << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"";
    if (*dash) os << " stroke-dasharray=\"" << dash << '"';
    os << "/>\n<text x=\"" << lx + 32 << "\" y=\"" << ly + 4 << "\">" << xml_escape(s.label)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace vmerton
