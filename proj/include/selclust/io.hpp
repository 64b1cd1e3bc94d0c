#pragma once
// CSV matrices in and out, JSON encodings of results and reports, and the
// SVG QQ plot.

#include "selclust/core_model.hpp"
#include "selclust/hclust.hpp"
#include "selclust/inference.hpp"
#include "selclust/interval_set.hpp"
#include "selclust/sim.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace selclust {

/// Comma-separated numbers, one observation per line, optionally preceded
/// by one header line. `source` names the input in error messages.
DataMatrix parse_csv(std::istream& in, const std::string& source = "<input>");
DataMatrix load_csv(const std::string& path);
/// Square matrix, e.g. a covariance; header allowed as above.
Eigen::MatrixXd load_square_csv(const std::string& path);

/// 17 significant digits, so parse_csv(write_csv(m)) == m.
void write_csv(std::ostream& out, const RowMatrix& m);
void write_csv(const std::string& path, const RowMatrix& m);

/// Shortest round-tripping text for a double.
std::string format_double(double v);

/// p-values under this threshold are shown as "<1e-307".
inline constexpr double kSmallestShownP = 1e-307;

/// [[lo, hi, lo_open, hi_open], ...] with "inf" for +infinity.
nlohmann::json to_json(const IntervalSet& set);
/// A number, or the string "<1e-307".
nlohmann::json p_value_json(double p);
nlohmann::json to_json(const TestResult& result);

nlohmann::json to_json(const MergeHistory& history);

/// Aggregates only; the per-replicate records go to CSV.
nlohmann::json to_json(const SimReport& report);
void write_records_csv(std::ostream& out, const SimReport& report);

/// Sorted p-values against uniform quantiles with the y = x diagonal.
std::string qq_plot_svg(const std::vector<double>& p, const std::string& title);

}  // namespace selclust
