#include "selclust/error.hpp"
#include "selclust/inference.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace selclust;
using selclust::testing::quadrature_survival;
using selclust::testing::random_data;
using selclust::testing::random_union;
using selclust::testing::random_final_pair;

TEST_CASE("chi survival frozen values") {
  CHECK(chi_survival(2, 1.0, 2.0).value == doctest::Approx(0.1353352832366127).epsilon(1e-14));
  CHECK(chi_survival(3, 1.0, 0.0).value == 1.0);
  TruncatedChi d{2, 1.0, IntervalSet({Interval{0, 1, false, false}, Interval{2, kInfinity}})};
  CHECK(truncated_chi_survival(d, 2.0) == doctest::Approx(0.2559268153419913).epsilon(1e-13));
}

TEST_CASE("far tail survival stays finite in log space") {
  TruncatedChi d{1, 1.0, IntervalSet({Interval{0, 1}, Interval{40, kInfinity}})};
  const auto p = truncated_chi_survival_log(d, 40.0);
  CHECK(p.value == 0.0);
  CHECK(p.log_value == doctest::Approx(-803.5335796868917).epsilon(1e-12));

  TruncatedChi e{10, 2.0,
                 IntervalSet({Interval{0, 3}, Interval{5, 6}, Interval{100, kInfinity}})};
  CHECK(truncated_chi_survival_log(e, 100.0).log_value ==
        doctest::Approx(-1223.333354363890).epsilon(1e-12));
  CHECK(truncated_chi_survival(e, 5.0) == doctest::Approx(0.9777364307787524).epsilon(1e-12));

  // Support entirely in the far tail: ratio of two underflowing masses.
  TruncatedChi tail{3, 1.0, IntervalSet({Interval{50, 51}, Interval{52, kInfinity}})};
  const double p_tail = truncated_chi_survival(tail, 52.0);
  CHECK(p_tail > 0.0);
  CHECK(p_tail < 1e-40);
  CHECK(truncated_chi_survival(tail, 50.0) == doctest::Approx(1.0));
}

TEST_CASE("survival edge cases") {
  TruncatedChi half{4, 1.5};
  CHECK(truncated_chi_survival(half, 0.0) == doctest::Approx(1.0));
  for (double t : {0.3, 1.0, 4.0, 9.0}) {
    TruncatedChi upper{4, 1.5, IntervalSet({Interval{t, kInfinity}})};
    CHECK(truncated_chi_survival(upper, t) == doctest::Approx(1.0));
  }
  TruncatedChi bounded{3, 1.0, IntervalSet({Interval{1, 2}})};
  CHECK(truncated_chi_survival(bounded, 2.5) == 0.0);
  CHECK_THROWS_AS(truncated_chi_survival(TruncatedChi{3, 1.0, IntervalSet()}, 1.0), Error);
  TruncatedChi point{3, 1.0, IntervalSet({Interval{1, 1, false, false}})};
  CHECK_THROWS_AS(truncated_chi_survival(point, 1.0), Error);
}

TEST_CASE("survival matches quadrature and is monotone") {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> qd(1, 12);
  std::uniform_real_distribution<double> cd(0.3, 3.0);
  for (int rep = 0; rep < 100; ++rep) {
    const int q = qd(rng);
    const double c = cd(rng);
    const auto s = random_union(rng, 3, 4.0 * c * std::sqrt(q));
    std::uniform_real_distribution<double> td(0.0, s.intervals().back().lo + c);
    double prev = 1.0;
    std::vector<double> ts;
    for (int i = 0; i < 5; ++i) ts.push_back(td(rng));
    std::sort(ts.begin(), ts.end());
    for (double t : ts) {
      TruncatedChi d{q, c, s};
      const double p = truncated_chi_survival(d, t);
      CHECK(std::abs(p - quadrature_survival(q, c, s, t)) < 1e-8);
      CHECK(p <= prev + 1e-15);
      prev = p;
    }
  }
}

TEST_CASE("larger scale gives larger survival") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> cd(0.3, 3.0);
  for (int rep = 0; rep < 200; ++rep) {
    const int q = 1 + rep % 8;
    double c1 = cd(rng), c2 = cd(rng);
    if (c1 > c2) std::swap(c1, c2);
    if (c2 - c1 < 1e-3) continue;
    const auto s = random_union(rng, 3, 3.0 * std::sqrt(q));
    const auto& piece = s.intervals()[rng() % s.size()];
    const double hi = std::isfinite(piece.hi) ? piece.hi : piece.lo + 1.0;
    const double t = piece.lo + 0.5 * (hi - piece.lo);
    if (t <= s.intervals().front().lo) continue;
    CHECK(truncated_chi_survival({q, c1, s}, t) < truncated_chi_survival({q, c2, s}, t));
  }
}

TEST_CASE("estimate_sigma examples") {
  RowMatrix m(2, 1);
  m << 0, 2;
  CHECK(estimate_sigma(DataMatrix(m)) == doctest::Approx(std::sqrt(2.0)));
  RowMatrix c = RowMatrix::Constant(5, 3, 2.5);
  CHECK(estimate_sigma(DataMatrix(c)) == 0.0);
}

TEST_CASE("untruncated case equals the Wald p-value") {
  RowMatrix m(2, 3);
  m << 0, 0, 0, 1, 2, -1;
  DataMatrix x(m);
  const auto h = run_agglomerative(x, Linkage::average, 2);
  ClusterPair pair(ClusterSet({0}), ClusterSet({1}), 2);
  const auto exact = selective_p_exact(x, h, pair, 1.3);
  CHECK(exact.p_value == doctest::Approx(wald_p(x, pair, 1.3)).epsilon(1e-12));
  CHECK(exact.statistic == doctest::Approx(std::sqrt(6.0)));
  CHECK(wald_p(x, pair, 1.3) ==
        doctest::Approx(boost::math::cdf(boost::math::complement(
                            boost::math::chi_squared(3), 6.0 / (1.3 * 1.3 * 2.0))))
            .epsilon(1e-12));
}

TEST_CASE("Wald with a stat of zero") {
  RowMatrix m(4, 2);
  m << 0, 0, 1, 1, 0, 0, 1, 1;
  DataMatrix x(m);
  ClusterPair pair(ClusterSet({0, 1}), ClusterSet({2, 3}), 4);
  CHECK(wald_p(x, pair, 1.0) == 1.0);
  CovarianceFactor eye(Eigen::MatrixXd::Identity(2, 2));
  CHECK(wald_p_cov(x, pair, eye) == 1.0);
}

TEST_CASE("Wald covariance reductions") {
  std::mt19937_64 rng(9);
  auto x = random_data(rng, 12, 4);
  ClusterPair pair(ClusterSet({0, 1, 2, 3}), ClusterSet({4, 5, 6}), 12);
  CovarianceFactor eye(Eigen::MatrixXd::Identity(4, 4));
  CHECK(wald_p_cov(x, pair, eye) == doctest::Approx(wald_p(x, pair, 1.0)).epsilon(1e-12));

  Eigen::MatrixXd a = Eigen::MatrixXd::Random(4, 4);
  Eigen::MatrixXd sigma = a * a.transpose() + Eigen::MatrixXd::Identity(4, 4);
  const Vector diff = empirical_mean(x, pair.first()) - empirical_mean(x, pair.second());
  const double maha = diff.dot(sigma.inverse() * diff) / (1.0 / 4 + 1.0 / 3);
  const double direct = boost::math::cdf(boost::math::complement(boost::math::chi_squared(4), maha));
  CHECK(wald_p_cov(x, pair, CovarianceFactor(sigma)) == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("scalar covariance reproduces the exact p-value") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 50; ++rep) {
    auto x = random_data(rng, 20, 3);
    const double sigma = 0.5 + 0.05 * rep;
    const auto linkage = rep % 2 ? Linkage::average : Linkage::single;
    const auto h = run_agglomerative(x, linkage, 3);
    const auto pair = random_final_pair(rng, h);
    const auto exact = selective_p_exact(x, h, pair, sigma);
    const auto cov = selective_p_cov(
        x, h, pair, CovarianceFactor(sigma * sigma * Eigen::MatrixXd::Identity(3, 3)));
    CHECK(std::abs(exact.p_value - cov.p_value) < 1e-8);
    CHECK(cov.statistic == doctest::Approx(exact.statistic / sigma));
    CHECK(cov.method == Method::covariance);
    CHECK(exact.truncation_set->contains(exact.statistic));
  }
}

TEST_CASE("covariance p-value is invariant under joint rescaling") {
  std::mt19937_64 rng(12);
  auto x = random_data(rng, 18, 3);
  const auto h = run_agglomerative(x, Linkage::average, 3);
  const auto pair = random_final_pair(rng, h);
  Eigen::MatrixXd sigma(3, 3);
  sigma << 2, 0.5, 0, 0.5, 1, 0.2, 0, 0.2, 0.7;
  const double gamma = 4.0;
  RowMatrix scaled = x.values() * std::sqrt(gamma);
  const auto p1 = selective_p_cov(x, h, pair, CovarianceFactor(sigma));
  const auto h2 = run_agglomerative(DataMatrix(scaled), Linkage::average, 3);
  const auto p2 = selective_p_cov(DataMatrix(scaled), h2, pair, CovarianceFactor(gamma * sigma));
  CHECK(p1.p_value == doctest::Approx(p2.p_value).epsilon(1e-8));
}

TEST_CASE("plug-in with the true sigma equals the exact test") {
  std::mt19937_64 rng(13);
  auto x = random_data(rng, 15, 2);
  const auto h = run_agglomerative(x, Linkage::ward, 3);
  const auto pair = random_final_pair(rng, h);
  const auto a = selective_p_exact(x, h, pair, 1.0);
  const auto b = selective_p_plugin(x, h, pair, 1.0);
  CHECK(a.p_value == b.p_value);
  CHECK(b.method == Method::plugin);
  CHECK(selective_p_plugin(x, h, pair, 2.0).p_value > b.p_value);
}

TEST_CASE("importance sampling tracks the exact p-value") {
  std::mt19937_64 rng(2718);
  int checked = 0;
  for (int rep = 0; rep < 15; ++rep) {
    auto x = random_data(rng, 30, 4);
    HierarchicalClusterer clusterer(Linkage::average, 3);
    const auto h = run_agglomerative(x, Linkage::average, 3);
    const auto pair = random_final_pair(rng, h);
    const auto exact = selective_p_exact(x, h, pair, 1.0);
    const auto mc = selective_p_importance(x, clusterer, pair, 1.0, 2000, 100 + rep);
    CHECK(mc.method == Method::monte_carlo);
    CHECK(*mc.n_samples == 2000);
    if (exact.p_value > 0.1 && exact.p_value < 0.9) {
      ++checked;
      CHECK(std::abs(mc.p_value - exact.p_value) < 0.08);
    }
    // Same seed, same answer.
    CHECK(selective_p_importance(x, clusterer, pair, 1.0, 2000, 100 + rep).p_value == mc.p_value);
  }
  CHECK(checked > 0);
}

TEST_CASE("fast preservation path agrees with reclustering") {
  std::mt19937_64 rng(5);
  for (Linkage linkage : {Linkage::average, Linkage::complete, Linkage::single, Linkage::centroid}) {
    auto x = random_data(rng, 14, 3);
    HierarchicalClusterer fast(linkage, 3);
    const auto pair = random_final_pair(rng, run_agglomerative(x, linkage, 3));
    const auto g = spherical_geometry(x, pair);
    std::vector<double> phis;
    for (int i = 0; i < 60; ++i) phis.push_back(0.1 * i * g.statistic);
    const auto a = fast.preserves(x, g, pair, phis);
    const auto b = fast.Clusterer::preserves(x, g, pair, phis);
    CHECK(a == b);
  }
}

TEST_CASE("importance sampling degenerate answers") {
  // Two far-apart singletons: every proposal keeps the pair.
  RowMatrix m(2, 1);
  m << 0, 10;
  DataMatrix x(m);
  ClusterPair pair(ClusterSet({0}), ClusterSet({1}), 2);
  HierarchicalClusterer clusterer(Linkage::complete, 2);
  const auto mc = selective_p_importance(x, clusterer, pair, 1.0, 1, 3);
  CHECK((mc.p_value == 0.0 || mc.p_value == 1.0));
  CHECK(*mc.ess > 0.0);
  CHECK(mc.low_ess);
  CHECK_THROWS_AS(selective_p_importance(x, clusterer, pair, 1.0, 0, 3), Error);
}

TEST_CASE("invalid sigma is rejected") {
  RowMatrix m(2, 1);
  m << 0, 1;
  DataMatrix x(m);
  ClusterPair pair(ClusterSet({0}), ClusterSet({1}), 2);
  const auto h = run_agglomerative(x, Linkage::average, 2);
  CHECK_THROWS_AS(selective_p_exact(x, h, pair, 0.0), Error);
  CHECK_THROWS_AS(selective_p_exact(x, h, pair, -1.0), Error);
}
