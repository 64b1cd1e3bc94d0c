#include "selclust/io.hpp"

#include "selclust/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace selclust {

namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  for (;;) {
    const size_t comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_number(const std::string& field, double& value) {
  if (field.empty()) return false;
  const char* begin = field.data();
  const char* end = begin + field.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  return ec == std::errc() && ptr == end;
}

json number_or_text(double v) {
  if (std::isnan(v)) return nullptr;
  if (v == kInfinity) return "inf";
  if (v == -kInfinity) return "-inf";
  return v;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

DataMatrix parse_csv(std::istream& in, const std::string& source) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  size_t width = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    std::vector<double> row(fields.size());
    bool numeric = true;
    size_t bad = 0;
    for (size_t j = 0; j < fields.size(); ++j) {
      if (!parse_number(fields[j], row[j])) {
        numeric = false;
        bad = j;
        break;
      }
    }
    if (!numeric) {
      if (rows.empty() && !header_seen) {
        header_seen = true;
        width = fields.size();
        continue;
      }
      throw Error(ErrorCode::data, source + ": line " + std::to_string(line_no) + ", column " +
                                       std::to_string(bad + 1) + ": cannot parse '" +
                                       fields[bad] + "' as a number");
    }
    for (size_t j = 0; j < row.size(); ++j) {
      if (!std::isfinite(row[j])) {
        throw Error(ErrorCode::data, source + ": line " + std::to_string(line_no) +
                                         ", column " + std::to_string(j + 1) +
                                         ": non-finite value '" + fields[j] + "'");
      }
    }
    if (width == 0) width = row.size();
    if (row.size() != width) {
      throw Error(ErrorCode::data, source + ": line " + std::to_string(line_no) + " has " +
                                       std::to_string(row.size()) + " fields, expected " +
                                       std::to_string(width));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::data, source + ": no data rows");
  RowMatrix m(rows.size(), width);
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < width; ++j) m(i, j) = rows[i][j];
  return DataMatrix(std::move(m));
}

DataMatrix load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::data, "cannot open '" + path + "'");
  return parse_csv(in, path);
}

Eigen::MatrixXd load_square_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::data, "cannot open '" + path + "'");
  // A 1 x 1 matrix is legal here, so read rows without the n >= 2 rule.
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::string text = buffer.str();
  std::vector<std::vector<double>> rows;
  std::istringstream lines(text);
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(lines, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    std::vector<double> row(fields.size());
    bool numeric = true;
    for (size_t j = 0; j < fields.size() && numeric; ++j) numeric = parse_number(fields[j], row[j]);
    if (!numeric) {
      if (rows.empty() && !header_seen) {
        header_seen = true;
        continue;
      }
      throw Error(ErrorCode::data, path + ": line " + std::to_string(line_no) + " is not numeric");
    }
    for (double v : row)
      if (!std::isfinite(v))
        throw Error(ErrorCode::data, path + ": line " + std::to_string(line_no) + ": non-finite value");
    rows.push_back(std::move(row));
  }
  const size_t q = rows.size();
  for (size_t i = 0; i < q; ++i) {
    if (rows[i].size() != q) {
      throw Error(ErrorCode::data, path + ": matrix is not square (" + std::to_string(q) +
                                       " rows, row " + std::to_string(i + 1) + " has " +
                                       std::to_string(rows[i].size()) + " fields)");
    }
  }
  if (q == 0) throw Error(ErrorCode::data, path + ": empty matrix");
  Eigen::MatrixXd m(q, q);
  for (size_t i = 0; i < q; ++i)
    for (size_t j = 0; j < q; ++j) m(i, j) = rows[i][j];
  return m;
}

std::string format_double(double v) {
  char buf[40];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const RowMatrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

void write_csv(const std::string& path, const RowMatrix& m) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::config, "cannot write '" + path + "'");
  write_csv(out, m);
}

json to_json(const IntervalSet& set) {
  json out = json::array();
  for (const Interval& p : set.intervals()) {
    out.push_back({number_or_text(p.lo), number_or_text(p.hi), p.lo_open, p.hi_open});
  }
  return out;
}

json p_value_json(double p) {
  if (p < kSmallestShownP) return "<1e-307";
  return p;
}

json to_json(const TestResult& r) {
  json out;
  out["statistic"] = r.statistic;
  out["p_value"] = p_value_json(r.p_value);
  out["log_p"] = number_or_text(r.log_p);
  out["method"] = std::string(to_string(r.method));
  if (r.truncation_set) out["truncation_set"] = to_json(*r.truncation_set);
  if (r.n_samples) out["n_samples"] = *r.n_samples;
  if (r.ess) {
    out["ess"] = *r.ess;
    out["low_ess"] = r.low_ess;
  }
  out["sigma_used"] = r.sigma_used ? json(*r.sigma_used) : json(nullptr);
  if (r.near_tie) out["near_tie"] = true;
  return out;
}

json to_json(const MergeHistory& h) {
  json out;
  out["n"] = h.n();
  out["k"] = h.k();
  out["linkage"] = std::string(to_string(h.linkage()));
  json labels = json::array();
  for (int l : h.final_labels()) labels.push_back(l + 1);
  out["labels"] = labels;
  json clusters = json::array();
  for (const ClusterSet& c : h.final_clusters()) {
    json members = json::array();
    for (int i : c) members.push_back(i + 1);
    clusters.push_back({{"size", c.size()}, {"members", members}});
  }
  out["clusters"] = clusters;
  json heights = json::array();
  for (const MergeStep& s : h.steps()) heights.push_back(s.height);
  out["merge_heights"] = heights;
  json inversions = json::array();
  for (int t : h.inversion_steps()) inversions.push_back(t);
  out["inversion_steps"] = inversions;
  out["had_ties"] = h.had_ties();
  return out;
}

json to_json(const SimReport& report) {
  const StudyConfig& c = report.config;
  json out;
  out["study"] = std::string(to_string(report.study));
  out["linkage"] = std::string(to_string(c.linkage));
  out["config"] = {{"n", c.n},         {"q", c.q},
                   {"sigma", c.sigma}, {"k", c.k},
                   {"reps", c.reps},   {"deltas", c.deltas},
                   {"alpha", c.alpha}, {"mc_samples", c.mc_samples},
                   {"seed", c.seed},   {"covariance", c.covariance.has_value()}};
  out["records"] = report.records.size();
  out["skipped"] = report.skipped;
  out["attempts"] = report.attempts;

  const std::vector<double> all = p_values(report);
  out["ks_statistic"] = ks_statistic_uniform(all);
  out["max_ecdf_excess"] = max_ecdf_excess(all);
  out["rejection_rate"] = rejection_rate(all, c.alpha);
  const std::vector<double> wald = wald_p_values(report);
  out["wald"] = {{"ks_statistic", ks_statistic_uniform(wald)},
                 {"rejection_rate", rejection_rate(wald, c.alpha)}};

  json ecdf = json::array();
  std::vector<double> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 1; i <= 20; ++i) {
    const double t = i / 20.0;
    const auto below = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    ecdf.push_back({{"t", t}, {"value", sorted.empty() ? 0.0 : double(below) / sorted.size()}});
  }
  out["ecdf"] = ecdf;

  json per_delta = json::array();
  for (double delta : c.deltas) {
    const std::vector<double> p = p_values(report, delta);
    per_delta.push_back({{"delta", delta},
                         {"count", p.size()},
                         {"ks_statistic", ks_statistic_uniform(p)},
                         {"max_ecdf_excess", max_ecdf_excess(p)},
                         {"rejection_rate", rejection_rate(p, c.alpha)}});
  }
  out["per_delta"] = per_delta;

  if (report.study == Study::conditional_power || report.study == Study::effect_size) {
    json power = json::array();
    for (const PowerPoint& pt : conditional_power(report)) {
      power.push_back({{"delta", pt.delta},
                       {"replicates", pt.replicates},
                       {"recovered", pt.recovered},
                       {"recovery", pt.recovery},
                       {"recovery_se", pt.recovery_se},
                       {"power", pt.power},
                       {"power_se", pt.power_se}});
    }
    out["conditional_power"] = power;
  }
  if (report.study == Study::effect_size) {
    json bins;
    for (bool large : {true, false}) {
      json list = json::array();
      for (const PowerBin& b : binned_power(report, large)) {
        list.push_back({{"lo", b.lo},
                        {"hi", b.hi},
                        {"mean_effect", b.mean_effect},
                        {"count", b.count},
                        {"rate", b.rate},
                        {"se", b.se}});
      }
      bins[large ? "min_size_at_least_10" : "min_size_below_10"] = list;
    }
    out["binned_power"] = bins;
  }
  return out;
}

void write_records_csv(std::ostream& out, const SimReport& report) {
  out << "replicate,delta,statistic,p_value,log_p,wald_p,size1,size2,recovered,effect_size,"
         "boundary_distance,sigma_used,method\n";
  auto num = [](double v) { return std::isnan(v) ? std::string("NA") : format_double(v); };
  for (const ReplicateRecord& r : report.records) {
    out << r.replicate << ',' << num(r.delta) << ',' << num(r.statistic) << ',' << num(r.p_value)
        << ',' << num(r.log_p) << ',' << num(r.wald_p) << ',' << r.size1 << ',' << r.size2 << ','
        << (r.recovered ? 1 : 0) << ',' << num(r.effect_size) << ',' << num(r.boundary_distance)
        << ',' << num(r.sigma_used) << ',' << to_string(r.method) << '\n';
  }
}

std::string qq_plot_svg(const std::vector<double>& p, const std::string& title) {
  constexpr double size = 400.0, margin = 40.0, inner = size - 2 * margin;
  auto x_of = [&](double u) { return fixed(margin + u * inner, 2); };
  auto y_of = [&](double u) { return fixed(size - margin - u * inner, 2); };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"400\" height=\"400\" "
       "viewBox=\"0 0 400 400\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"400\" height=\"400\" fill=\"white\"/>\n";
  s << "<rect x=\"40\" y=\"40\" width=\"320\" height=\"320\" fill=\"none\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << x_of(0) << "\" y1=\"" << y_of(0) << "\" x2=\"" << x_of(1) << "\" y2=\""
    << y_of(1) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  for (const QQPoint& pt : qq_points(p)) {
    s << "<circle cx=\"" << x_of(pt.expected) << "\" cy=\"" << y_of(pt.observed)
      << "\" r=\"1.5\" fill=\"steelblue\"/>\n";
  }
  std::string escaped;
  for (char ch : title) {
    if (ch == '<') escaped += "&lt;";
    else if (ch == '>') escaped += "&gt;";
    else if (ch == '&') escaped += "&amp;";
    else escaped += ch;
  }
  s << "<text x=\"200\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << escaped
    << "</text>\n";
  s << "<text x=\"200\" y=\"390\" text-anchor=\"middle\" font-size=\"12\">Uniform(0, 1) "
       "quantiles</text>\n";
  s << "<text x=\"14\" y=\"200\" text-anchor=\"middle\" font-size=\"12\" "
       "transform=\"rotate(-90 14 200)\">p-value quantiles</text>\n";
  s << "</svg>\n";
  return s.str();
}

}  // namespace selclust
