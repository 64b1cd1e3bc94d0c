#include "selclust/inference.hpp"

#include "selclust/error.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

namespace selclust {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLowEss = 20.0;

// Below this Q(a, x) is taken from the continued fraction in log space.
constexpr double kTinyQ = 1e-280;

// log Gamma(a, x) / Gamma(a) by the Legendre continued fraction (modified
// Lentz); only called for x well beyond a.
double log_gamma_q_cf(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return -x + a * std::log(x) - std::lgamma(a) + std::log(h);
}

double log_gamma_q(double a, double x) {
  if (x == std::numeric_limits<double>::infinity()) return kNegInf;
  if (x <= 0.0) return 0.0;
  const double q = boost::math::gamma_q(a, x);
  if (q > kTinyQ) return std::log(q);
  return log_gamma_q_cf(a, x);
}

double log_sum_exp(const std::vector<double>& terms) {
  double top = kNegInf;
  for (double t : terms) top = std::max(top, t);
  if (top == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - top);
  return top + std::log(sum);
}

void check_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::config, "sigma must be positive and finite, got " + std::to_string(sigma));
  }
}

TestResult exact_from_geometry(const DataMatrix& x, const MergeHistory& history,
                               const ClusterPair& pair, const PerturbationGeometry& g,
                               double scale, Method method) {
  const TruncationResult trunc = truncation_set(x, history, pair, g);
  const TruncatedChi dist{x.q(), scale, trunc.set};
  const Probability p = truncated_chi_survival_log(dist, g.statistic);
  TestResult out;
  out.statistic = g.statistic;
  out.p_value = p.value;
  out.log_p = p.log_value;
  out.method = method;
  out.truncation_set = trunc.set;
  out.near_tie = trunc.near_tie;
  return out;
}

TestResult importance_from_geometry(const DataMatrix& x, const Clusterer& clusterer,
                                    const ClusterPair& pair, const PerturbationGeometry& g,
                                    double scale, int samples, std::uint64_t seed) {
  if (samples < 1) throw Error(ErrorCode::config, "Monte Carlo sample count must be at least 1");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> proposal(g.statistic, scale);
  std::vector<double> omega(samples);
  for (double& w : omega) w = proposal(rng);

  std::vector<double> phis;
  phis.reserve(samples);
  for (double w : omega)
    if (w >= 0.0) phis.push_back(w);
  const std::vector<char> keep = clusterer.preserves(x, g, pair, phis);

  const int q = x.q();
  const double log_norm = std::log(scale * std::sqrt(2.0 * std::numbers::pi));
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < phis.size(); ++i) {
    if (!keep[i]) continue;
    const double w = phis[i];
    const double z = (w - g.statistic) / scale;
    const double log_f2 = -0.5 * z * z - log_norm;
    const double weight = std::exp(chi_log_density(q, scale, w) - log_f2);
    den += weight;
    if (w >= g.statistic) num += weight;
  }
  if (!(den > 0.0)) {
    throw Error(ErrorCode::unstable_estimate,
                "no Monte Carlo sample preserved the clusters (samples=" +
                    std::to_string(samples) + ", nonnegative=" + std::to_string(phis.size()) +
                    ", statistic=" + std::to_string(g.statistic) + ")");
  }

  TestResult out;
  out.statistic = g.statistic;
  out.p_value = std::clamp(num / den, 0.0, 1.0);
  out.log_p = out.p_value > 0.0 ? std::log(out.p_value) : kNegInf;
  out.method = Method::monte_carlo;
  out.n_samples = samples;
  out.ess = den;
  out.low_ess = den < kLowEss;
  return out;
}

}  // namespace

double chi_log_density(int q, double scale, double w) {
  if (w < 0.0) return kNegInf;
  const double a = 0.5 * q;
  if (w == 0.0) {
    if (q > 1) return kNegInf;
    return 0.5 * std::log(2.0 / std::numbers::pi) - std::log(scale);
  }
  const double z = w / scale;
  return (q - 1) * std::log(z) - 0.5 * z * z - (a - 1.0) * std::numbers::ln2 - std::lgamma(a) -
         std::log(scale);
}

double chi_log_mass(int q, double scale, const Interval& interval) {
  if (interval.empty()) return kNegInf;
  const double a = 0.5 * q;
  const double z1 = std::max(interval.lo, 0.0) / scale;
  const double z2 = interval.hi / scale;
  const double x1 = 0.5 * z1 * z1;
  const double x2 = std::isfinite(z2) ? 0.5 * z2 * z2 : std::numeric_limits<double>::infinity();
  if (!(x2 > x1)) return kNegInf;

  if (x1 < a) {
    const double p1 = boost::math::gamma_p(a, x1);
    const double p2 = std::isfinite(x2) ? boost::math::gamma_p(a, x2) : 1.0;
    const double m = p2 - p1;
    return m > 0.0 ? std::log(m) : kNegInf;
  }
  const double lq1 = log_gamma_q(a, x1);
  const double lq2 = log_gamma_q(a, x2);
  if (lq1 > std::log(kTinyQ)) {
    const double m = std::exp(lq1) - std::exp(lq2);
    if (m > 0.0) return std::log(m);
  }
  if (!(lq1 > lq2)) return kNegInf;
  return lq1 + std::log1p(-std::exp(lq2 - lq1));
}

Probability truncated_chi_survival_log(const TruncatedChi& dist, double t) {
  if (dist.q < 1 || !(dist.scale > 0.0)) {
    throw Error(ErrorCode::config, "truncated chi needs q >= 1 and a positive scale");
  }
  std::vector<double> all, upper;
  for (const Interval& piece : dist.support.intervals()) {
    all.push_back(chi_log_mass(dist.q, dist.scale, piece));
  }
  const double log_den = log_sum_exp(all);
  if (log_den == kNegInf) {
    throw Error(ErrorCode::degenerate_support, "truncation set carries no probability mass");
  }
  const IntervalSet above =
      dist.support.intersect(IntervalSet({Interval{t, kInfinity, false, true}}));
  for (const Interval& piece : above.intervals()) {
    upper.push_back(chi_log_mass(dist.q, dist.scale, piece));
  }
  const double log_num = log_sum_exp(upper);
  Probability p;
  p.log_value = std::min(log_num - log_den, 0.0);
  p.value = log_num == kNegInf ? 0.0 : std::exp(p.log_value);
  if (log_num == kNegInf) p.log_value = kNegInf;
  return p;
}

double truncated_chi_survival(const TruncatedChi& dist, double t) {
  return truncated_chi_survival_log(dist, t).value;
}

Probability chi_survival(int q, double scale, double t) {
  Probability p;
  if (t <= 0.0) return p;
  const double z = t / scale;
  p.log_value = log_gamma_q(0.5 * q, 0.5 * z * z);
  p.value = std::exp(p.log_value);
  return p;
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::exact: return "exact";
    case Method::monte_carlo: return "monte_carlo";
    case Method::covariance: return "covariance";
    case Method::plugin: return "plugin";
    case Method::wald: return "wald";
  }
  return "unknown";
}

TestResult selective_p_exact(const DataMatrix& x, const MergeHistory& history,
                             const ClusterPair& pair, double sigma) {
  check_sigma(sigma);
  const PerturbationGeometry g = spherical_geometry(x, pair);
  TestResult out = exact_from_geometry(x, history, pair, g,
                                       sigma * std::sqrt(g.nu.squared_norm), Method::exact);
  out.sigma_used = sigma;
  return out;
}

TestResult selective_p_plugin(const DataMatrix& x, const MergeHistory& history,
                              const ClusterPair& pair, double sigma_hat) {
  TestResult out = selective_p_exact(x, history, pair, sigma_hat);
  out.method = Method::plugin;
  return out;
}

TestResult selective_p_cov(const DataMatrix& x, const MergeHistory& history,
                           const ClusterPair& pair, const CovarianceFactor& sigma) {
  const PerturbationGeometry g = covariance_geometry(x, pair, sigma);
  return exact_from_geometry(x, history, pair, g, std::sqrt(g.nu.squared_norm),
                             Method::covariance);
}

std::vector<char> Clusterer::preserves(const DataMatrix& x, const PerturbationGeometry& g,
                                       const ClusterPair& pair,
                                       std::span<const double> phis) const {
  std::vector<char> out;
  out.reserve(phis.size());
  for (double phi : phis) out.push_back(labels_contain_pair(labels(perturbed_dataset(x, g, phi)), pair));
  return out;
}

namespace {

std::vector<int> hierarchical_labels(RowMatrix& d, Linkage linkage, int k) {
  if (may_invert(linkage)) return run_agglomerative(d, linkage, k).final_labels();
  return nn_chain_labels(d, linkage, k);
}

}  // namespace

std::vector<int> HierarchicalClusterer::labels(const DataMatrix& x) const {
  RowMatrix d = dissimilarity_matrix(x);
  return hierarchical_labels(d, linkage_, k_);
}

std::vector<char> HierarchicalClusterer::preserves(const DataMatrix& x,
                                                   const PerturbationGeometry& g,
                                                   const ClusterPair& pair,
                                                   std::span<const double> phis) const {
  const int n = x.n();
  std::vector<PhiQuadratic> quads;
  quads.reserve(static_cast<size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) quads.push_back(base_quadratic(x, g, i, j));

  std::vector<char> out;
  out.reserve(phis.size());
  RowMatrix d(n, n);
  for (double phi : phis) {
    size_t idx = 0;
    for (int i = 0; i < n; ++i) {
      d(i, i) = 0.0;
      for (int j = i + 1; j < n; ++j) {
        const double v = std::max(quads[idx++](phi), 0.0);
        d(i, j) = v;
        d(j, i) = v;
      }
    }
    out.push_back(labels_contain_pair(hierarchical_labels(d, linkage_, k_), pair));
  }
  return out;
}

bool labels_contain_pair(const std::vector<int>& labels, const ClusterPair& pair) {
  auto is_class = [&](const ClusterSet& g) {
    const int label = labels[g.smallest()];
    for (int i : g)
      if (labels[i] != label) return false;
    return std::count(labels.begin(), labels.end(), label) == g.size();
  };
  return is_class(pair.first()) && is_class(pair.second());
}

TestResult selective_p_importance(const DataMatrix& x, const Clusterer& clusterer,
                                  const ClusterPair& pair, double sigma, int samples,
                                  std::uint64_t seed) {
  check_sigma(sigma);
  const PerturbationGeometry g = spherical_geometry(x, pair);
  TestResult out = importance_from_geometry(x, clusterer, pair, g,
                                            sigma * std::sqrt(g.nu.squared_norm), samples, seed);
  out.sigma_used = sigma;
  return out;
}

TestResult selective_p_importance_cov(const DataMatrix& x, const Clusterer& clusterer,
                                      const ClusterPair& pair, const CovarianceFactor& sigma,
                                      int samples, std::uint64_t seed) {
  const PerturbationGeometry g = covariance_geometry(x, pair, sigma);
  return importance_from_geometry(x, clusterer, pair, g, std::sqrt(g.nu.squared_norm), samples,
                                  seed);
}

double estimate_sigma(const DataMatrix& x) {
  const int n = x.n(), q = x.q();
  if (n < 2) throw Error(ErrorCode::data, "estimating sigma needs at least two observations");
  const Eigen::RowVectorXd mean = x.values().colwise().mean();
  const double ss = (x.values().rowwise() - mean).squaredNorm();
  return std::sqrt(ss / (static_cast<double>(n) * q - q));
}

double wald_p(const DataMatrix& x, const ClusterPair& pair, double sigma) {
  return wald_test(x, pair, sigma).p_value;
}

TestResult wald_test(const DataMatrix& x, const ClusterPair& pair, double sigma) {
  check_sigma(sigma);
  const ContrastVector nu = contrast_vector(pair, x.n());
  TestResult out;
  out.statistic = test_statistic(x, pair);
  const Probability p = chi_survival(x.q(), sigma * std::sqrt(nu.squared_norm), out.statistic);
  out.p_value = p.value;
  out.log_p = p.log_value;
  out.method = Method::wald;
  out.sigma_used = sigma;
  return out;
}

double wald_p_cov(const DataMatrix& x, const ClusterPair& pair, const CovarianceFactor& sigma) {
  if (sigma.dim() != x.q()) {
    throw Error(ErrorCode::config, "covariance dimension does not match the data");
  }
  const ContrastVector nu = contrast_vector(pair, x.n());
  const Vector diff = empirical_mean(x, pair.first()) - empirical_mean(x, pair.second());
  const double w = sigma.whitened_norm(diff);
  return chi_survival(x.q(), std::sqrt(nu.squared_norm), w).value;
}

TestResult selective_test(const DataMatrix& x, const MergeHistory& history,
                          const ClusterPair& pair, const TestOptions& options) {
  const Linkage linkage = history.linkage();
  const bool exact_possible = linkage != Linkage::complete;
  bool exact = options.method == MethodChoice::exact ||
               (options.method == MethodChoice::automatic && exact_possible);
  if (exact && !exact_possible) {
    throw Error(ErrorCode::unsupported_linkage,
                "no exact p-value for complete linkage; use the Monte Carlo method");
  }
  if (exact) {
    if (options.covariance) return selective_p_cov(x, history, pair, *options.covariance);
    return options.sigma_estimated ? selective_p_plugin(x, history, pair, options.sigma)
                                   : selective_p_exact(x, history, pair, options.sigma);
  }
  const HierarchicalClusterer clusterer(linkage, history.k());
  if (options.covariance) {
    return selective_p_importance_cov(x, clusterer, pair, *options.covariance,
                                      options.mc_samples, options.seed);
  }
  return selective_p_importance(x, clusterer, pair, options.sigma, options.mc_samples,
                                options.seed);
}

ClusterPair random_cluster_pair(const MergeHistory& history, std::uint64_t seed) {
  const auto& clusters = history.final_clusters();
  const int k = static_cast<int>(clusters.size());
  if (k < 2) throw Error(ErrorCode::config, "need at least two clusters to pick a pair");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> first(0, k - 1);
  std::uniform_int_distribution<int> second(0, k - 2);
  int a = first(rng);
  int b = second(rng);
  if (b >= a) ++b;
  if (a > b) std::swap(a, b);
  return ClusterPair(clusters[a], clusters[b], history.n());
}

}  // namespace selclust
