#pragma once

#include <string>
#include <vector>

#include "vmerton/merton.hpp"
#include "vmerton/riccati.hpp"

namespace vmerton {

/// "%.17g": enough digits to round-trip any double.
std::string format_double(double x);

/// Rows of numbers or strings under a fixed header.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(const std::vector<double>& row);
  void add_row(std::vector<std::string> row);
  std::size_t rows() const noexcept { return rows_.size(); }
  const std::vector<std::string>& header() const noexcept { return header_; }
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Writes to a sibling temporary file, then renames over `path`.
void write_atomic(const std::string& path, const std::string& content);

/// t, pi_1..pi_d, hedge_1..hedge_d, myopic_1..myopic_d
CsvTable strategy_table(const StrategyPath& strategy);
/// t, psi_1..psi_d for a vector path; t, psi_11, psi_12, ..., psi_dd
/// (upper triangle) for a matrix path. Only computed nodes are written.
CsvTable riccati_table(const VectorRiccatiPath& path);
CsvTable riccati_table(const MatrixRiccatiPath& path);
/// T, value, certainty_equivalent
CsvTable value_table(double horizon, const ValueReport& value);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Self-contained SVG line plot with axes, ticks and a legend.
std::string render_svg(const std::vector<Series>& series, const std::string& title,
                       const std::string& x_label, const std::string& y_label);

/// One series per hedging-demand component.
std::vector<Series> hedging_series(const StrategyPath& strategy, const std::string& prefix = "");

}  // namespace vmerton
