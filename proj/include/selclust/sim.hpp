#pragma once
// Data generation from the matrix-normal model and the simulation studies:
// global-null uniformity, conditional power and recovery, plug-in sigma
// under clustered nulls, and power against effect size.
//
// Every replicate draws from its own generator seeded by (seed, replicate,
// stream), with separate streams for the data, the random pair, the
// sample split and Monte Carlo sampling.

#include "selclust/core_model.hpp"
#include "selclust/hclust.hpp"
#include "selclust/inference.hpp"

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace selclust {

enum class MeanKind { global_null, three_equidistant, two_cluster };

struct MeanModel {
  MeanKind kind = MeanKind::global_null;
  int n = 150;
  int q = 10;
  double delta = 0.0;
  double sigma = 1.0;
  /// When set, rows are N(mu_i, covariance) and sigma is ignored.
  std::optional<Eigen::MatrixXd> covariance;

  /// True cluster of each row: thirds for three_equidistant, halves for
  /// two_cluster, all zero under the global null.
  std::vector<int> labels() const;
  /// Mean vector of each true cluster, one per row.
  RowMatrix cluster_means() const;
};

DataMatrix generate(const MeanModel& model, std::uint64_t seed);

/// Seed for replicate `rep` on stream `stream`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t rep, std::uint64_t stream);

enum class Study { null, conditional_power, plugin_sigma, effect_size };

std::string_view to_string(Study study);
std::optional<Study> parse_study(std::string_view name);

struct StudyConfig {
  Linkage linkage = Linkage::average;
  int n = 150;
  int q = 10;
  double sigma = 1.0;
  int k = 3;
  /// Replicates per delta (the null study ignores deltas).
  int reps = 2000;
  std::vector<double> deltas;
  double alpha = 0.05;
  int mc_samples = 2000;
  std::uint64_t seed = 1;
  /// Null study only: generate and test under this covariance.
  std::optional<Eigen::MatrixXd> covariance;

  /// Defaults of each study: n = 150 null, 30 conditional power, 200 plug-in,
  /// 150 effect size, with the matching delta grids.
  static StudyConfig defaults(Study study);
};

struct ReplicateRecord {
  int replicate = 0;
  double delta = 0.0;
  double statistic = 0.0;
  double p_value = 1.0;
  double log_p = 0.0;
  /// Naive chi_q p-value for the same pair (NaN under a covariance).
  double wald_p = 1.0;
  int size1 = 0;
  int size2 = 0;
  bool recovered = false;
  /// ||mean of true means over c1 - over c2|| / sigma.
  double effect_size = 0.0;
  /// statistic minus the left end of the truncation-set piece holding it
  /// (NaN for Monte Carlo results).
  double boundary_distance = 0.0;
  double sigma_used = 0.0;
  Method method = Method::exact;
};

struct SimReport {
  Study study = Study::null;
  StudyConfig config;
  std::vector<ReplicateRecord> records;
  /// Replicates dropped because the test could not be computed.
  int skipped = 0;
  /// Datasets drawn (the plug-in study discards non-null draws).
  int attempts = 0;
};

/// Global null, random pair of the K clusters, exact test (Monte Carlo for
/// complete linkage).
SimReport run_null_study(const StudyConfig& config);
/// Three equidistant clusters of n/3 rows for each delta.
SimReport run_conditional_power_study(const StudyConfig& config);
/// Two clusters, each dataset split in half: cluster the first half, estimate
/// sigma on the second. Only draws where the tested pair has equal true means
/// are kept, until `reps` per delta are collected.
SimReport run_plugin_sigma_study(const StudyConfig& config);
/// Three equidistant clusters, records the effect size of every tested pair.
SimReport run_effect_size_study(const StudyConfig& config);
SimReport run_study(Study study, const StudyConfig& config);

/// Records with the given delta, or all of them.
std::vector<double> p_values(const SimReport& report, std::optional<double> delta = {});
std::vector<double> wald_p_values(const SimReport& report);

/// Kolmogorov-Smirnov distance to Uniform(0, 1); 0 for an empty sample.
double ks_statistic_uniform(std::vector<double> p);
/// sup_t (ecdf(t) - t): how far the p-values sit below uniform.
double max_ecdf_excess(std::vector<double> p);
double rejection_rate(const std::vector<double>& p, double alpha);

struct QQPoint {
  double expected;
  double observed;
};
std::vector<QQPoint> qq_points(std::vector<double> p);

struct PowerPoint {
  double delta = 0.0;
  int replicates = 0;
  int recovered = 0;
  int rejected_recovered = 0;
  double recovery = 0.0;
  double recovery_se = 0.0;
  double power = 0.0;
  double power_se = 0.0;
};
/// P(reject | recovered) and P(recovered) per delta.
std::vector<PowerPoint> conditional_power(const SimReport& report);

struct PowerBin {
  double lo = 0.0;
  double hi = 0.0;
  double mean_effect = 0.0;
  int count = 0;
  double rate = 0.0;
  double se = 0.0;
};
/// Rejection rate in effect-size quantile bins, restricted to records with
/// min(size1, size2) >= 10 (large) or < 10.
std::vector<PowerBin> binned_power(const SimReport& report, bool large_clusters, int bins = 10);

}  // namespace selclust
