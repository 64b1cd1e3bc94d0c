#include "selclust/sim.hpp"

#include "selclust/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace selclust {

namespace {

enum Stream : std::uint64_t { kData = 0, kPair = 1, kSplit = 2, kMonteCarlo = 3 };

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> even_grid(double lo, double hi, int count) {
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i) out[i] = count > 1 ? lo + (hi - lo) * i / (count - 1) : lo;
  return out;
}

void check_config(const StudyConfig& c) {
  if (c.reps < 0) throw Error(ErrorCode::config, "replicate count must be nonnegative");
  if (c.k < 2 || c.k > c.n) throw Error(ErrorCode::config, "K must lie in [2, n]");
  if (!(c.sigma > 0.0)) throw Error(ErrorCode::config, "sigma must be positive");
  if (c.mc_samples < 1) throw Error(ErrorCode::config, "Monte Carlo sample count must be positive");
}

Vector pair_mean(const RowMatrix& means, const ClusterSet& g) {
  Vector sum = Vector::Zero(means.cols());
  for (int i : g) sum += means.row(i).transpose();
  return sum / g.size();
}

// Tests one pair and fills everything except replicate and delta.
ReplicateRecord test_pair(const DataMatrix& x, const MergeHistory& history,
                          const ClusterPair& pair, const TestOptions& options,
                          const std::vector<int>& truth, const RowMatrix& means, double sigma) {
  const TestResult result = selective_test(x, history, pair, options);
  ReplicateRecord r;
  r.statistic = result.statistic;
  r.p_value = result.p_value;
  r.log_p = result.log_p;
  r.method = result.method;
  r.sigma_used = result.sigma_used.value_or(kNaN);
  r.wald_p = options.covariance ? kNaN : wald_p(x, pair, options.sigma);
  r.size1 = pair.first().size();
  r.size2 = pair.second().size();
  r.recovered = labels_contain_pair(truth, pair);
  r.effect_size = (pair_mean(means, pair.first()) - pair_mean(means, pair.second())).norm() / sigma;
  r.boundary_distance = kNaN;
  if (result.truncation_set) {
    if (const Interval* piece = result.truncation_set->interval_containing(result.statistic)) {
      r.boundary_distance = result.statistic - piece->lo;
    }
  }
  return r;
}

SimReport run_three_cluster_study(Study study, const StudyConfig& config) {
  check_config(config);
  SimReport report{study, config, {}, 0, 0};
  for (size_t d = 0; d < config.deltas.size(); ++d) {
    MeanModel model{MeanKind::three_equidistant, config.n, config.q, config.deltas[d],
                    config.sigma, std::nullopt};
    const std::vector<int> truth = model.labels();
    const RowMatrix means = model.cluster_means();
    for (int rep = 0; rep < config.reps; ++rep) {
      const std::uint64_t id = d * static_cast<std::uint64_t>(config.reps) + rep;
      ++report.attempts;
      const DataMatrix x = generate(model, derive_seed(config.seed, id, kData));
      const MergeHistory history = run_agglomerative(x, config.linkage, config.k);
      const ClusterPair pair = random_cluster_pair(history, derive_seed(config.seed, id, kPair));
      TestOptions options;
      options.sigma = config.sigma;
      options.mc_samples = config.mc_samples;
      options.seed = derive_seed(config.seed, id, kMonteCarlo);
      try {
        ReplicateRecord r = test_pair(x, history, pair, options, truth, means, config.sigma);
        r.replicate = rep;
        r.delta = config.deltas[d];
        report.records.push_back(r);
      } catch (const Error&) {
        ++report.skipped;
      }
    }
  }
  return report;
}

}  // namespace

std::vector<int> MeanModel::labels() const {
  std::vector<int> out(n, 0);
  if (kind == MeanKind::three_equidistant) {
    for (int i = 0; i < n; ++i) out[i] = i < n / 3 ? 0 : (i < 2 * n / 3 ? 1 : 2);
  } else if (kind == MeanKind::two_cluster) {
    for (int i = 0; i < n; ++i) out[i] = i < n / 2 ? 0 : 1;
  }
  return out;
}

RowMatrix MeanModel::cluster_means() const {
  RowMatrix mu = RowMatrix::Zero(n, q);
  const std::vector<int> label = labels();
  for (int i = 0; i < n; ++i) {
    if (kind == MeanKind::three_equidistant) {
      if (label[i] == 0) mu(i, 0) = -delta / 2;
      if (label[i] == 1) mu(i, q - 1) = std::sqrt(3.0) * delta / 2;
      if (label[i] == 2) mu(i, 0) = delta / 2;
    } else if (kind == MeanKind::two_cluster) {
      if (label[i] == 0) mu(i, 0) = delta / 2;
      if (label[i] == 1) mu(i, q - 1) = -delta / 2;
    }
  }
  return mu;
}

DataMatrix generate(const MeanModel& model, std::uint64_t seed) {
  if (model.n < 2 || model.q < 1) throw Error(ErrorCode::config, "model needs n >= 2 and q >= 1");
  if (model.kind == MeanKind::three_equidistant && (model.n % 3 != 0 || model.q < 2)) {
    throw Error(ErrorCode::config, "three equidistant clusters need n divisible by 3 and q >= 2");
  }
  if (model.kind == MeanKind::two_cluster && (model.n % 2 != 0 || model.q < 2)) {
    throw Error(ErrorCode::config, "two clusters need an even n and q >= 2");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  RowMatrix noise(model.n, model.q);
  for (int i = 0; i < model.n; ++i)
    for (int j = 0; j < model.q; ++j) noise(i, j) = z(rng);
  RowMatrix out = model.cluster_means();
  if (model.covariance) {
    const CovarianceFactor factor(*model.covariance);
    if (factor.dim() != model.q) throw Error(ErrorCode::config, "covariance has the wrong size");
    const Eigen::MatrixXd lower = Eigen::LLT<Eigen::MatrixXd>(*model.covariance).matrixL();
    out += noise * lower.transpose();
  } else {
    out += model.sigma * noise;
  }
  return DataMatrix(std::move(out));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t rep, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(rep >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

std::string_view to_string(Study study) {
  switch (study) {
    case Study::null: return "null";
    case Study::conditional_power: return "conditional-power";
    case Study::plugin_sigma: return "plugin-sigma";
    case Study::effect_size: return "effect-size";
  }
  return "unknown";
}

std::optional<Study> parse_study(std::string_view name) {
  for (Study s : {Study::null, Study::conditional_power, Study::plugin_sigma, Study::effect_size}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

StudyConfig StudyConfig::defaults(Study study) {
  StudyConfig c;
  switch (study) {
    case Study::null:
      break;
    case Study::conditional_power:
      c.n = 30;
      c.reps = 10000;
      c.deltas = even_grid(4.0, 7.0, 7);
      break;
    case Study::plugin_sigma:
      c.n = 200;
      c.reps = 500;
      c.deltas = {2.0, 4.0, 6.0};
      break;
    case Study::effect_size:
      c.reps = 10000;
      c.deltas = even_grid(3.0, 7.0, 9);
      break;
  }
  return c;
}

SimReport run_null_study(const StudyConfig& config) {
  check_config(config);
  SimReport report{Study::null, config, {}, 0, 0};
  MeanModel model{MeanKind::global_null, config.n, config.q, 0.0, config.sigma, config.covariance};
  const std::vector<int> truth = model.labels();
  const RowMatrix means = model.cluster_means();
  std::optional<CovarianceFactor> factor;
  if (config.covariance) factor.emplace(*config.covariance);
  for (int rep = 0; rep < config.reps; ++rep) {
    ++report.attempts;
    const DataMatrix x = generate(model, derive_seed(config.seed, rep, kData));
    const MergeHistory history = run_agglomerative(x, config.linkage, config.k);
    const ClusterPair pair = random_cluster_pair(history, derive_seed(config.seed, rep, kPair));
    TestOptions options;
    options.sigma = config.sigma;
    options.covariance = factor;
    options.mc_samples = config.mc_samples;
    options.seed = derive_seed(config.seed, rep, kMonteCarlo);
    try {
      ReplicateRecord r = test_pair(x, history, pair, options, truth, means, config.sigma);
      r.replicate = rep;
      report.records.push_back(r);
    } catch (const Error&) {
      ++report.skipped;
    }
  }
  return report;
}

SimReport run_conditional_power_study(const StudyConfig& config) {
  return run_three_cluster_study(Study::conditional_power, config);
}

SimReport run_effect_size_study(const StudyConfig& config) {
  return run_three_cluster_study(Study::effect_size, config);
}

SimReport run_plugin_sigma_study(const StudyConfig& config) {
  check_config(config);
  if (config.n % 2 != 0) throw Error(ErrorCode::config, "the split needs an even n");
  SimReport report{Study::plugin_sigma, config, {}, 0, 0};
  const int half = config.n / 2;
  const std::uint64_t max_attempts = 200 * static_cast<std::uint64_t>(std::max(config.reps, 1));

  for (size_t d = 0; d < config.deltas.size(); ++d) {
    MeanModel model{MeanKind::two_cluster, config.n, config.q, config.deltas[d], config.sigma,
                    std::nullopt};
    const std::vector<int> truth = model.labels();
    const RowMatrix means = model.cluster_means();
    int kept = 0;
    for (std::uint64_t attempt = 0; kept < config.reps && attempt < max_attempts; ++attempt) {
      const std::uint64_t id = (static_cast<std::uint64_t>(d) << 40) + attempt;
      ++report.attempts;
      const DataMatrix full = generate(model, derive_seed(config.seed, id, kData));

      std::vector<int> order(config.n);
      std::iota(order.begin(), order.end(), 0);
      std::mt19937_64 split_rng(derive_seed(config.seed, id, kSplit));
      std::shuffle(order.begin(), order.end(), split_rng);
      std::sort(order.begin(), order.begin() + half);
      std::sort(order.begin() + half, order.end());
      RowMatrix train(half, config.q), test(half, config.q), train_means(half, config.q);
      std::vector<int> train_truth(half);
      for (int i = 0; i < half; ++i) {
        train.row(i) = full.row(order[i]);
        train_means.row(i) = means.row(order[i]);
        train_truth[i] = truth[order[i]];
        test.row(i) = full.row(order[half + i]);
      }
      const DataMatrix x(std::move(train));
      const MergeHistory history = run_agglomerative(x, config.linkage, config.k);
      const ClusterPair pair = random_cluster_pair(history, derive_seed(config.seed, id, kPair));

      // Equal true means <=> equal shares of the first true cluster.
      auto share = [&](const ClusterSet& g) {
        return std::count_if(g.begin(), g.end(), [&](int i) { return train_truth[i] == 0; });
      };
      if (share(pair.first()) * pair.second().size() != share(pair.second()) * pair.first().size())
        continue;

      TestOptions options;
      options.sigma = estimate_sigma(DataMatrix(std::move(test)));
      options.sigma_estimated = true;
      options.mc_samples = config.mc_samples;
      options.seed = derive_seed(config.seed, id, kMonteCarlo);
      try {
        ReplicateRecord r =
            test_pair(x, history, pair, options, train_truth, train_means, config.sigma);
        r.replicate = kept;
        r.delta = config.deltas[d];
        report.records.push_back(r);
        ++kept;
      } catch (const Error&) {
        ++report.skipped;
      }
    }
  }
  return report;
}

SimReport run_study(Study study, const StudyConfig& config) {
  switch (study) {
    case Study::null: return run_null_study(config);
    case Study::conditional_power: return run_conditional_power_study(config);
    case Study::plugin_sigma: return run_plugin_sigma_study(config);
    case Study::effect_size: return run_effect_size_study(config);
  }
  throw Error(ErrorCode::config, "unknown study");
}

std::vector<double> p_values(const SimReport& report, std::optional<double> delta) {
  std::vector<double> out;
  for (const ReplicateRecord& r : report.records)
    if (!delta || r.delta == *delta) out.push_back(r.p_value);
  return out;
}

std::vector<double> wald_p_values(const SimReport& report) {
  std::vector<double> out;
  for (const ReplicateRecord& r : report.records)
    if (!std::isnan(r.wald_p)) out.push_back(r.wald_p);
  return out;
}

double ks_statistic_uniform(std::vector<double> p) {
  if (p.empty()) return 0.0;
  std::sort(p.begin(), p.end());
  const double m = static_cast<double>(p.size());
  double d = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    d = std::max({d, (i + 1) / m - p[i], p[i] - i / m});
  }
  return d;
}

double max_ecdf_excess(std::vector<double> p) {
  if (p.empty()) return 0.0;
  std::sort(p.begin(), p.end());
  const double m = static_cast<double>(p.size());
  double d = 0.0;
  for (size_t i = 0; i < p.size(); ++i) d = std::max(d, (i + 1) / m - p[i]);
  return d;
}

double rejection_rate(const std::vector<double>& p, double alpha) {
  if (p.empty()) return 0.0;
  const auto hits = std::count_if(p.begin(), p.end(), [&](double v) { return v <= alpha; });
  return static_cast<double>(hits) / p.size();
}

std::vector<QQPoint> qq_points(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  std::vector<QQPoint> out;
  out.reserve(p.size());
  const double m = static_cast<double>(p.size());
  for (size_t i = 0; i < p.size(); ++i) out.push_back({(i + 0.5) / m, p[i]});
  return out;
}

std::vector<PowerPoint> conditional_power(const SimReport& report) {
  std::vector<PowerPoint> out;
  for (double delta : report.config.deltas) {
    PowerPoint pt;
    pt.delta = delta;
    for (const ReplicateRecord& r : report.records) {
      if (r.delta != delta) continue;
      ++pt.replicates;
      if (!r.recovered) continue;
      ++pt.recovered;
      if (r.p_value <= report.config.alpha) ++pt.rejected_recovered;
    }
    if (pt.replicates > 0) {
      pt.recovery = static_cast<double>(pt.recovered) / pt.replicates;
      pt.recovery_se = std::sqrt(pt.recovery * (1 - pt.recovery) / pt.replicates);
    }
    if (pt.recovered > 0) {
      pt.power = static_cast<double>(pt.rejected_recovered) / pt.recovered;
      pt.power_se = std::sqrt(pt.power * (1 - pt.power) / pt.recovered);
    }
    out.push_back(pt);
  }
  return out;
}

std::vector<PowerBin> binned_power(const SimReport& report, bool large_clusters, int bins) {
  std::vector<const ReplicateRecord*> kept;
  for (const ReplicateRecord& r : report.records) {
    if ((std::min(r.size1, r.size2) >= 10) == large_clusters) kept.push_back(&r);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const ReplicateRecord* a, const ReplicateRecord* b) {
    return a->effect_size < b->effect_size;
  });
  std::vector<PowerBin> out;
  if (kept.empty() || bins < 1) return out;
  const size_t m = kept.size();
  for (int b = 0; b < bins; ++b) {
    const size_t begin = m * b / bins, end = m * (b + 1) / bins;
    if (begin == end) continue;
    PowerBin bin;
    bin.lo = kept[begin]->effect_size;
    bin.hi = kept[end - 1]->effect_size;
    bin.count = static_cast<int>(end - begin);
    int hits = 0;
    double sum = 0.0;
    for (size_t i = begin; i < end; ++i) {
      sum += kept[i]->effect_size;
      if (kept[i]->p_value <= report.config.alpha) ++hits;
    }
    bin.mean_effect = sum / bin.count;
    bin.rate = static_cast<double>(hits) / bin.count;
    bin.se = std::sqrt(bin.rate * (1 - bin.rate) / bin.count);
    out.push_back(bin);
  }
  return out;
}

}  // namespace selclust
