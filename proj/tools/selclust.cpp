// Command-line front end: cluster, test, oracle-check, simulate.

#include "selclust/error.hpp"
#include "selclust/inference.hpp"
#include "selclust/io.hpp"
#include "selclust/sim.hpp"
#include "selclust/truncation_set.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace selclust;
using nlohmann::json;

namespace {

constexpr int kOracleMismatchExit = 1;

const std::vector<std::string> kLinkageNames = {"average", "weighted", "ward",    "centroid",
                                                "median",  "single",   "complete"};

Linkage linkage_from(const std::string& name) {
  const auto l = parse_linkage(name);
  if (!l) throw Error(ErrorCode::config, "unknown linkage '" + name + "'");
  return *l;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() && item.find_first_not_of(" ", used) != std::string::npos)
        throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw Error(ErrorCode::config, "cannot parse " + what + " '" + text + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::config, "empty " + what);
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::config, "cannot parse number list '" + text + "'");
    }
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::config, "cannot write '" + path + "'");
  out << text;
}

void emit_json(const json& doc, const std::string& out_path) {
  std::cout << doc.dump(2) << '\n';
  if (!out_path.empty()) write_text(out_path, doc.dump(2) + "\n");
}

// Points of [0, inf) outside `s`, used to inject a deliberate oracle mismatch.
IntervalSet complement(const IntervalSet& s) {
  std::vector<Interval> out;
  double lo = 0.0;
  bool lo_open = false;
  for (const Interval& p : s.intervals()) {
    out.push_back({lo, p.lo, lo_open, !p.lo_open});
    lo = p.hi;
    lo_open = !p.hi_open;
  }
  if (lo != kInfinity) out.push_back({lo, kInfinity, lo_open, true});
  return IntervalSet(out);
}

struct ClusterArgs {
  std::string input;
  std::string linkage = "average";
  int k = 3;
  std::string out;
};

struct TestArgs {
  ClusterArgs base;
  std::string pair;
  bool all_pairs = false;
  std::string c1, c2;
  std::uint64_t seed = 1;
  double sigma = 0.0;
  bool estimate_sigma = false;
  std::string sigma_data;
  std::string cov;
  std::string method = "auto";
  int mc_samples = 2000;
  std::string csv;
  CLI::Option* sigma_opt = nullptr;
};

struct OracleArgs {
  std::string input;
  std::string linkage = "average";
  int k = 3;
  int n = 12;
  int q = 2;
  int count = 20;
  int grid = 400;
  int cap = 25;
  std::uint64_t seed = 1;
  bool mutate = false;
  std::string out;
};

struct SimArgs {
  std::string study = "null";
  std::string linkage = "average";
  std::string deltas;
  std::string cov;
  std::string out, csv, svg;
  int n = 0, q = 0, k = 0, reps = 0, mc_samples = 0;
  double sigma = 0.0, alpha = 0.0;
  std::uint64_t seed = 1;
  CLI::Option *n_opt, *q_opt, *k_opt, *reps_opt, *mc_opt, *sigma_opt, *alpha_opt, *seed_opt;
};

int cmd_cluster(const ClusterArgs& a) {
  const DataMatrix x = load_csv(a.input);
  const MergeHistory h = run_agglomerative(x, linkage_from(a.linkage), a.k);
  json doc = to_json(h);
  doc["command"] = "cluster";
  doc["input"] = a.input;
  emit_json(doc, a.out);
  return 0;
}

std::vector<std::pair<int, int>> resolve_pairs(const TestArgs& a, const MergeHistory& h,
                                               std::vector<ClusterPair>& pairs) {
  const int modes = (!a.pair.empty()) + a.all_pairs + (!a.c1.empty() || !a.c2.empty());
  if (modes != 1) {
    throw Error(ErrorCode::config, "give exactly one of --pair, --all-pairs, or --c1/--c2");
  }
  const auto& clusters = h.final_clusters();
  const int k = static_cast<int>(clusters.size());
  std::vector<std::pair<int, int>> labels;
  if (a.all_pairs) {
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) labels.push_back({i, j});
  } else if (a.pair == "random") {
    const ClusterPair p = random_cluster_pair(h, a.seed);
    pairs.push_back(p);
    return {{*h.find_final(p.first()), *h.find_final(p.second())}};
  } else if (!a.pair.empty()) {
    const auto ids = parse_int_list(a.pair, "--pair");
    if (ids.size() != 2 || ids[0] == ids[1] || ids[0] < 1 || ids[1] < 1 || ids[0] > k ||
        ids[1] > k) {
      throw Error(ErrorCode::invalid_pair, "--pair needs two distinct cluster numbers in 1.." +
                                               std::to_string(k));
    }
    labels.push_back({ids[0] - 1, ids[1] - 1});
  } else {
    if (a.c1.empty() || a.c2.empty()) throw Error(ErrorCode::config, "--c1 needs --c2");
    auto to_set = [&](const std::string& text, const char* what) {
      std::vector<int> m = parse_int_list(text, what);
      for (int& i : m) --i;
      return ClusterSet(m);
    };
    const ClusterPair p(to_set(a.c1, "--c1"), to_set(a.c2, "--c2"), h.n());
    const auto id1 = h.find_final(p.first()), id2 = h.find_final(p.second());
    if (!id1 || !id2) {
      throw Error(ErrorCode::invalid_pair, "--c1/--c2 are not clusters of the K-clustering");
    }
    pairs.push_back(p);
    return {{-1, -1}};
  }
  for (auto [i, j] : labels) pairs.emplace_back(clusters[i], clusters[j], h.n());
  return labels;
}

int cmd_test(const TestArgs& a) {
  const DataMatrix x = load_csv(a.base.input);
  const Linkage linkage = linkage_from(a.base.linkage);

  const bool fixed = a.sigma_opt->count() > 0;
  const int sigma_modes = fixed + a.estimate_sigma + !a.cov.empty();
  if (sigma_modes != 1) {
    throw Error(ErrorCode::config, "give exactly one of --sigma, --estimate-sigma, or --cov");
  }
  if (!a.sigma_data.empty() && !a.estimate_sigma) {
    throw Error(ErrorCode::config, "--sigma-data requires --estimate-sigma");
  }

  TestOptions options;
  options.mc_samples = a.mc_samples;
  if (a.method == "exact") options.method = MethodChoice::exact;
  if (a.method == "mc") options.method = MethodChoice::monte_carlo;
  if (options.method == MethodChoice::exact && linkage == Linkage::complete) {
    throw Error(ErrorCode::unsupported_linkage, "--method exact is not available for complete linkage");
  }
  json sigma_doc;
  if (fixed) {
    options.sigma = a.sigma;
    sigma_doc = {{"mode", "fixed"}, {"value", a.sigma}};
  } else if (a.estimate_sigma) {
    const std::string source = a.sigma_data.empty() ? a.base.input : a.sigma_data;
    const DataMatrix held = a.sigma_data.empty() ? x : load_csv(a.sigma_data);
    if (held.q() != x.q()) {
      throw Error(ErrorCode::data, "--sigma-data has " + std::to_string(held.q()) +
                                       " columns, the input has " + std::to_string(x.q()));
    }
    options.sigma = estimate_sigma(held);
    options.sigma_estimated = true;
    sigma_doc = {{"mode", "estimated"}, {"value", options.sigma}, {"source", source}};
  } else {
    options.covariance.emplace(load_square_csv(a.cov));
    if (options.covariance->dim() != x.q()) {
      throw Error(ErrorCode::config, "covariance is " + std::to_string(options.covariance->dim()) +
                                         " x " + std::to_string(options.covariance->dim()) +
                                         " but the data have q = " + std::to_string(x.q()));
    }
    sigma_doc = {{"mode", "covariance"}, {"source", a.cov}};
  }

  const MergeHistory h = run_agglomerative(x, linkage, a.base.k);
  std::vector<ClusterPair> pairs;
  const auto labels = resolve_pairs(a, h, pairs);

  json results = json::array();
  std::ostringstream csv;
  csv << "cluster1,cluster2,size1,size2,statistic,p_value,log_p,method,wald_p,wald_log_p\n";
  for (size_t idx = 0; idx < pairs.size(); ++idx) {
    const ClusterPair& pair = pairs[idx];
    const int l1 = labels[idx].first >= 0 ? labels[idx].first
                                          : h.final_labels()[pair.first().smallest()];
    const int l2 = labels[idx].second >= 0 ? labels[idx].second
                                           : h.final_labels()[pair.second().smallest()];
    json rec;
    rec["clusters"] = {l1 + 1, l2 + 1};
    rec["sizes"] = {pair.first().size(), pair.second().size()};
    TestOptions opt = options;
    opt.seed = derive_seed(a.seed, idx, 3);
    try {
      const TestResult r = selective_test(x, h, pair, opt);
      rec.update(to_json(r));
      Probability wald;
      if (options.covariance) {
        wald.value = wald_p_cov(x, pair, *options.covariance);
        wald.log_value = std::log(wald.value);
      } else {
        const TestResult w = wald_test(x, pair, options.sigma);
        wald = {w.p_value, w.log_p};
      }
      rec["wald"] = {{"p_value", p_value_json(wald.value)},
                     {"log_p", std::isfinite(wald.log_value) ? json(wald.log_value) : json("-inf")}};
      csv << l1 + 1 << ',' << l2 + 1 << ',' << pair.first().size() << ','
          << pair.second().size() << ',' << format_double(r.statistic) << ','
          << (r.p_value < kSmallestShownP ? std::string("<1e-307") : format_double(r.p_value))
          << ',' << format_double(r.log_p) << ',' << to_string(r.method) << ','
          << (wald.value < kSmallestShownP ? std::string("<1e-307") : format_double(wald.value))
          << ',' << format_double(wald.log_value) << '\n';
    } catch (const Error& e) {
      if (pairs.size() == 1) throw;
      rec["error"] = std::string(to_string(e.code()));
      rec["message"] = e.what();
    }
    results.push_back(rec);
  }

  json doc;
  doc["command"] = "test";
  doc["input"] = a.base.input;
  doc["n"] = x.n();
  doc["q"] = x.q();
  doc["linkage"] = a.base.linkage;
  doc["k"] = a.base.k;
  doc["sigma"] = sigma_doc;
  doc["results"] = results;
  emit_json(doc, a.base.out);
  if (!a.csv.empty()) write_text(a.csv, csv.str());
  return 0;
}

int cmd_oracle_check(const OracleArgs& a) {
  const Linkage linkage = linkage_from(a.linkage);
  std::optional<DataMatrix> given;
  if (!a.input.empty()) given = load_csv(a.input);
  const int n = given ? given->n() : a.n;
  if (n > a.cap) {
    throw Error(ErrorCode::config, "oracle check is capped at n = " + std::to_string(a.cap) +
                                       ", got n = " + std::to_string(n));
  }
  if (a.grid < 2) throw Error(ErrorCode::config, "--grid needs at least 2 points");
  const int count = given ? 1 : a.count;
  long checked = 0, mismatches = 0;
  json failures = json::array();
  for (int i = 0; i < count; ++i) {
    const DataMatrix x =
        given ? *given
              : generate(MeanModel{MeanKind::global_null, a.n, a.q, 0.0, 1.0, std::nullopt},
                         derive_seed(a.seed, i, 0));
    const MergeHistory h = run_agglomerative(x, linkage, a.k);
    const ClusterPair pair = random_cluster_pair(h, derive_seed(a.seed, i, 1));
    const PerturbationGeometry g = spherical_geometry(x, pair);
    IntervalSet s = truncation_set(x, h, pair, g).set;
    if (a.mutate) s = complement(s);
    const auto grid = default_oracle_grid(h, g, a.grid);
    const auto member = truncation_set_grid_oracle(x, linkage, a.k, pair, g, grid);
    const double step = grid[1] - grid[0];
    long bad = 0;
    for (size_t j = 0; j < grid.size(); ++j) {
      if (s.distance_to_boundary(grid[j]) <= step) continue;
      ++checked;
      if (static_cast<bool>(member[j]) != s.contains(grid[j])) ++bad;
    }
    mismatches += bad;
    if (bad) failures.push_back({{"instance", i}, {"mismatches", bad}});
  }
  json doc;
  doc["command"] = "oracle-check";
  doc["linkage"] = a.linkage;
  doc["k"] = a.k;
  doc["instances"] = count;
  doc["points_checked"] = checked;
  doc["mismatches"] = mismatches;
  doc["failures"] = failures;
  doc["mutated"] = a.mutate;
  doc["pass"] = mismatches == 0;
  emit_json(doc, a.out);
  return mismatches == 0 ? 0 : kOracleMismatchExit;
}

int cmd_simulate(SimArgs& a) {
  const auto study = parse_study(a.study);
  if (!study) throw Error(ErrorCode::config, "unknown study '" + a.study + "'");
  StudyConfig c = StudyConfig::defaults(*study);
  c.linkage = linkage_from(a.linkage);
  if (a.n_opt->count()) c.n = a.n;
  if (a.q_opt->count()) c.q = a.q;
  if (a.k_opt->count()) c.k = a.k;
  if (a.reps_opt->count()) c.reps = a.reps;
  if (a.mc_opt->count()) c.mc_samples = a.mc_samples;
  if (a.sigma_opt->count()) c.sigma = a.sigma;
  if (a.alpha_opt->count()) c.alpha = a.alpha;
  if (a.seed_opt->count()) c.seed = a.seed;
  if (!a.deltas.empty()) c.deltas = parse_double_list(a.deltas);
  if (!a.cov.empty()) {
    if (*study != Study::null) throw Error(ErrorCode::config, "--cov applies to the null study only");
    c.covariance = load_square_csv(a.cov);
  }
  const SimReport report = run_study(*study, c);
  json doc = to_json(report);
  doc["command"] = "simulate";
  emit_json(doc, a.out);
  if (!a.csv.empty()) {
    std::ostringstream csv;
    write_records_csv(csv, report);
    write_text(a.csv, csv.str());
  }
  if (!a.svg.empty()) {
    write_text(a.svg, qq_plot_svg(p_values(report),
                                  a.study + " study, " + a.linkage + " linkage"));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tests for a difference in means between clusters from hierarchical clustering"};
  app.require_subcommand(1);

  ClusterArgs cluster_args;
  auto* cluster = app.add_subcommand("cluster", "Cluster a CSV and print the K clusters");
  cluster->add_option("--input", cluster_args.input, "CSV data, one observation per row")
      ->required();
  cluster->add_option("--linkage", cluster_args.linkage)->check(CLI::IsMember(kLinkageNames));
  cluster->add_option("--k", cluster_args.k, "Number of clusters");
  cluster->add_option("--out", cluster_args.out, "Also write the JSON here");

  TestArgs test_args;
  auto* test = app.add_subcommand("test", "Test for a difference in cluster means");
  test->add_option("--input", test_args.base.input, "CSV data")->required();
  test->add_option("--linkage", test_args.base.linkage)->check(CLI::IsMember(kLinkageNames));
  test->add_option("--k", test_args.base.k, "Number of clusters");
  test->add_option("--pair", test_args.pair, "Cluster numbers \"1,3\" or \"random\"");
  test->add_flag("--all-pairs", test_args.all_pairs, "Test every pair of clusters");
  test->add_option("--c1", test_args.c1, "Observation numbers of the first cluster");
  test->add_option("--c2", test_args.c2, "Observation numbers of the second cluster");
  test->add_option("--seed", test_args.seed, "Seed for --pair random and Monte Carlo");
  test_args.sigma_opt = test->add_option("--sigma", test_args.sigma, "Known noise sd");
  test->add_flag("--estimate-sigma", test_args.estimate_sigma, "Estimate sigma from data");
  test->add_option("--sigma-data", test_args.sigma_data, "CSV to estimate sigma from");
  test->add_option("--cov", test_args.cov, "Known q x q covariance CSV");
  test->add_option("--method", test_args.method)->check(CLI::IsMember({"auto", "exact", "mc"}));
  test->add_option("--mc-samples", test_args.mc_samples, "Importance samples")
      ->check(CLI::PositiveNumber);
  test->add_option("--out", test_args.base.out, "Also write the JSON here");
  test->add_option("--csv", test_args.csv, "Write one CSV row per tested pair");

  OracleArgs oracle_args;
  auto* oracle = app.add_subcommand("oracle-check",
                                    "Compare the analytic truncation set with reclustering");
  oracle->add_option("--input", oracle_args.input, "CSV data (default: random instances)");
  oracle->add_option("--linkage", oracle_args.linkage)->check(CLI::IsMember(kLinkageNames));
  oracle->add_option("--k", oracle_args.k);
  oracle->add_option("--n", oracle_args.n, "Observations per random instance");
  oracle->add_option("--q", oracle_args.q, "Features per random instance");
  oracle->add_option("--count", oracle_args.count, "Random instances");
  oracle->add_option("--grid", oracle_args.grid, "Grid points");
  oracle->add_option("--cap", oracle_args.cap, "Largest n allowed");
  oracle->add_option("--seed", oracle_args.seed);
  oracle->add_flag("--mutate", oracle_args.mutate, "Complement the analytic set (negative control)");
  oracle->add_option("--out", oracle_args.out, "Also write the JSON here");

  SimArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "Run a simulation study");
  sim->add_option("--study", sim_args.study)
      ->check(CLI::IsMember({"null", "conditional-power", "plugin-sigma", "effect-size"}));
  sim->add_option("--linkage", sim_args.linkage)->check(CLI::IsMember(kLinkageNames));
  sim_args.n_opt = sim->add_option("--n", sim_args.n);
  sim_args.q_opt = sim->add_option("--q", sim_args.q);
  sim_args.k_opt = sim->add_option("--k", sim_args.k);
  sim_args.reps_opt = sim->add_option("--reps", sim_args.reps, "Replicates (per delta)");
  sim_args.mc_opt = sim->add_option("--mc-samples", sim_args.mc_samples);
  sim_args.sigma_opt = sim->add_option("--sigma", sim_args.sigma);
  sim_args.alpha_opt = sim->add_option("--alpha", sim_args.alpha);
  sim_args.seed_opt = sim->add_option("--seed", sim_args.seed);
  sim->add_option("--deltas", sim_args.deltas, "Comma-separated deltas");
  sim->add_option("--cov", sim_args.cov, "Covariance CSV for the null study");
  sim->add_option("--out", sim_args.out, "Also write the aggregate JSON here");
  sim->add_option("--csv", sim_args.csv, "Per-replicate CSV");
  sim->add_option("--svg", sim_args.svg, "QQ plot of the p-values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(ErrorCode::config);
  }

  try {
    if (*cluster) return cmd_cluster(cluster_args);
    if (*test) return cmd_test(test_args);
    if (*oracle) return cmd_oracle_check(oracle_args);
    if (*sim) return cmd_simulate(sim_args);
  } catch (const Error& e) {
    json err = {{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
    std::cerr << err.dump() << '\n';
    return exit_code(e.code());
  }
  return 0;
}
