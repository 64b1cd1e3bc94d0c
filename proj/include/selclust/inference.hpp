#pragma once
// p-values for a difference in means between two estimated clusters:
// the exact truncated-chi test, its importance-sampling approximation for
// clusterings without a closed-form truncation set, the known-covariance
// and plug-in-variance variants, and the naive Wald baselines.

#include "selclust/core_model.hpp"
#include "selclust/hclust.hpp"
#include "selclust/interval_set.hpp"
#include "selclust/truncation_set.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace selclust {

/// c * chi_q restricted to `support`.
struct TruncatedChi {
  int q = 1;
  double scale = 1.0;
  IntervalSet support = IntervalSet::nonnegative_half_line();
};

/// A probability together with its natural log, so that values far below
/// the smallest double stay ordered.
struct Probability {
  double value = 1.0;
  double log_value = 0.0;
};

/// log of the c * chi_q density at w (-inf for w < 0).
double chi_log_density(int q, double scale, double w);

/// log P(c chi_q in interval).
double chi_log_mass(int q, double scale, const Interval& interval);

/// P(phi >= t | phi in support). Throws degenerate_support when the support
/// has no mass.
Probability truncated_chi_survival_log(const TruncatedChi& dist, double t);
double truncated_chi_survival(const TruncatedChi& dist, double t);

/// Untruncated chi_q survival P(c chi_q >= t).
Probability chi_survival(int q, double scale, double t);

enum class Method { exact, monte_carlo, covariance, plugin, wald };

std::string_view to_string(Method method);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double log_p = 0.0;
  Method method = Method::exact;
  std::optional<IntervalSet> truncation_set;
  std::optional<int> n_samples;
  std::optional<double> ess;
  /// ess below 20.
  bool low_ess = false;
  /// Unset under a user-supplied covariance.
  std::optional<double> sigma_used;
  bool near_tie = false;
};

/// Exact selective p-value with known sigma. Linkage must be
/// Lance-Williams or single.
TestResult selective_p_exact(const DataMatrix& x, const MergeHistory& history,
                             const ClusterPair& pair, double sigma);

/// selective_p_exact with an estimated sigma, labelled as a plug-in result.
TestResult selective_p_plugin(const DataMatrix& x, const MergeHistory& history,
                              const ClusterPair& pair, double sigma_hat);

/// Exact selective p-value under a known covariance Sigma.
TestResult selective_p_cov(const DataMatrix& x, const MergeHistory& history,
                           const ClusterPair& pair, const CovarianceFactor& sigma);

/// A clustering procedure seen only through the labels it assigns.
class Clusterer {
 public:
  virtual ~Clusterer() = default;

  virtual std::vector<int> labels(const DataMatrix& x) const = 0;

  /// For each phi, whether both clusters of `pair` appear in the clustering
  /// of x'(phi). The default reclusters every perturbed dataset.
  virtual std::vector<char> preserves(const DataMatrix& x, const PerturbationGeometry& g,
                                      const ClusterPair& pair,
                                      std::span<const double> phis) const;
};

/// Hierarchical clustering cut at K clusters. Recomputes dissimilarities
/// from the per-pair quadratics in phi instead of rebuilding x'(phi).
class HierarchicalClusterer : public Clusterer {
 public:
  HierarchicalClusterer(Linkage linkage, int k) : linkage_(linkage), k_(k) {}

  std::vector<int> labels(const DataMatrix& x) const override;
  std::vector<char> preserves(const DataMatrix& x, const PerturbationGeometry& g,
                              const ClusterPair& pair,
                              std::span<const double> phis) const override;

  Linkage linkage() const { return linkage_; }
  int k() const { return k_; }

 private:
  Linkage linkage_;
  int k_;
};

/// True when both clusters of the pair are label classes.
bool labels_contain_pair(const std::vector<int>& labels, const ClusterPair& pair);

/// Importance-sampling estimate with proposal N(stat, c^2); deterministic
/// for a seed. Throws unstable_estimate when no sample keeps the pair.
TestResult selective_p_importance(const DataMatrix& x, const Clusterer& clusterer,
                                  const ClusterPair& pair, double sigma, int samples,
                                  std::uint64_t seed);
/// Same under a known covariance.
TestResult selective_p_importance_cov(const DataMatrix& x, const Clusterer& clusterer,
                                      const ClusterPair& pair, const CovarianceFactor& sigma,
                                      int samples, std::uint64_t seed);

/// sqrt(sum of squared column-centred entries / (nq - q)).
double estimate_sigma(const DataMatrix& x);

/// Naive chi_q p-value that ignores how the clusters were found.
double wald_p(const DataMatrix& x, const ClusterPair& pair, double sigma);
TestResult wald_test(const DataMatrix& x, const ClusterPair& pair, double sigma);

/// chi^2_q p-value of the Mahalanobis distance between the cluster means
/// divided by 1/|c1| + 1/|c2|.
double wald_p_cov(const DataMatrix& x, const ClusterPair& pair, const CovarianceFactor& sigma);

/// How selective_test picks between the exact and Monte Carlo p-values.
enum class MethodChoice { automatic, exact, monte_carlo };

struct TestOptions {
  MethodChoice method = MethodChoice::automatic;
  /// Known or estimated sigma; ignored when `covariance` is set.
  double sigma = 1.0;
  /// Report the result as a plug-in test.
  bool sigma_estimated = false;
  std::optional<CovarianceFactor> covariance;
  int mc_samples = 2000;
  std::uint64_t seed = 0;
};

/// Exact test when the linkage allows it (automatic) or when asked;
/// importance sampling for complete linkage or on request.
TestResult selective_test(const DataMatrix& x, const MergeHistory& history,
                          const ClusterPair& pair, const TestOptions& options);

/// Two distinct clusters of the K-clustering drawn uniformly with a
/// generator that never sees the data. The first has the smaller label.
ClusterPair random_cluster_pair(const MergeHistory& history, std::uint64_t seed);

}  // namespace selclust
