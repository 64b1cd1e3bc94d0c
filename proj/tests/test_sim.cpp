#include "selclust/error.hpp"
#include "selclust/sim.hpp"

#include <doctest.h>

#include <cmath>

using namespace selclust;

TEST_CASE("global null draws have the right moments") {
  // Pooled over the 10 columns, within 3 standard errors.
  MeanModel model{MeanKind::global_null, 100000, 10, 0.0, 1.0, std::nullopt};
  const DataMatrix x = generate(model, 7);
  const Eigen::RowVectorXd mean = x.values().colwise().mean();
  const double cells = 1e6;
  CHECK(std::abs(mean.mean()) < 3.0 / std::sqrt(cells));
  const double var = (x.values().rowwise() - mean).squaredNorm() / (cells - 10);
  CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / cells));
}

TEST_CASE("three equidistant means are pairwise delta apart") {
  MeanModel model{MeanKind::three_equidistant, 30, 10, 5.0, 1.0, std::nullopt};
  const RowMatrix mu = model.cluster_means();
  const auto labels = model.labels();
  CHECK((mu.row(0) - mu.row(10)).norm() == doctest::Approx(5.0));
  CHECK((mu.row(0) - mu.row(29)).norm() == doctest::Approx(5.0));
  CHECK((mu.row(10) - mu.row(20)).norm() == doctest::Approx(5.0));
  CHECK(labels[9] == 0);
  CHECK(labels[10] == 1);
  CHECK(labels[20] == 2);
  CHECK_THROWS_AS(generate(MeanModel{MeanKind::three_equidistant, 31, 10, 1.0, 1.0, {}}, 1), Error);
}

TEST_CASE("generation is deterministic per seed") {
  MeanModel model{MeanKind::two_cluster, 20, 3, 4.0, 2.0, std::nullopt};
  CHECK(generate(model, 3) == generate(model, 3));
  CHECK_FALSE(generate(model, 3) == generate(model, 4));
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 2, 4));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 3));
}

TEST_CASE("covariance draws follow Sigma") {
  Eigen::MatrixXd sigma(2, 2);
  sigma << 2.0, 0.8, 0.8, 1.0;
  MeanModel model{MeanKind::global_null, 20000, 2, 0.0, 1.0, sigma};
  const DataMatrix x = generate(model, 5);
  const Eigen::MatrixXd centered = x.values().rowwise() - x.values().colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / 19999.0;
  CHECK(cov(0, 0) == doctest::Approx(2.0).epsilon(0.05));
  CHECK(cov(0, 1) == doctest::Approx(0.8).epsilon(0.08));
  CHECK(cov(1, 1) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("KS statistic and ecdf excess") {
  CHECK(ks_statistic_uniform({}) == 0.0);
  CHECK(ks_statistic_uniform({0.5}) == doctest::Approx(0.5));
  CHECK(ks_statistic_uniform({0.25, 0.75}) == doctest::Approx(0.25));
  CHECK(ks_statistic_uniform({0.1, 0.2}) == doctest::Approx(0.8));
  CHECK(max_ecdf_excess({0.1, 0.2}) == doctest::Approx(0.8));
  CHECK(max_ecdf_excess({0.9, 0.95}) == doctest::Approx(0.05));
  CHECK(rejection_rate({0.01, 0.5, 0.04, 0.9}, 0.05) == doctest::Approx(0.5));
  const auto qq = qq_points({0.9, 0.1});
  CHECK(qq[0].observed == 0.1);
  CHECK(qq[1].expected == doctest::Approx(0.75));
}

TEST_CASE("empty study") {
  StudyConfig c = StudyConfig::defaults(Study::null);
  c.reps = 0;
  const SimReport r = run_null_study(c);
  CHECK(r.records.empty());
  CHECK(ks_statistic_uniform(p_values(r)) == 0.0);
}

TEST_CASE("null study is deterministic and valid") {
  StudyConfig c = StudyConfig::defaults(Study::null);
  c.n = 30;
  c.reps = 40;
  c.seed = 99;
  const SimReport a = run_null_study(c);
  const SimReport b = run_null_study(c);
  REQUIRE(a.records.size() + a.skipped == 40);
  for (size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].p_value == b.records[i].p_value);
    CHECK(a.records[i].p_value >= 0.0);
    CHECK(a.records[i].p_value <= 1.0);
    CHECK(a.records[i].boundary_distance >= 0.0);
    CHECK_FALSE(a.records[i].recovered);
  }
}

TEST_CASE("well separated clusters are recovered and rejected") {
  StudyConfig c = StudyConfig::defaults(Study::conditional_power);
  c.deltas = {20.0};
  c.reps = 30;
  const auto power = conditional_power(run_conditional_power_study(c));
  REQUIRE(power.size() == 1);
  CHECK(power[0].recovery == doctest::Approx(1.0));
  CHECK(power[0].power == doctest::Approx(1.0));
}

TEST_CASE("plug-in study keeps only null pairs") {
  StudyConfig c = StudyConfig::defaults(Study::plugin_sigma);
  c.n = 60;
  c.reps = 10;
  c.deltas = {4.0};
  const SimReport r = run_plugin_sigma_study(c);
  CHECK(r.records.size() == 10);
  for (const auto& rec : r.records) {
    CHECK(rec.effect_size == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(rec.method == Method::plugin);
  }
}

TEST_CASE("effect size bins cover the records") {
  StudyConfig c = StudyConfig::defaults(Study::effect_size);
  c.n = 30;
  c.reps = 20;
  c.deltas = {3.0, 7.0};
  const SimReport r = run_effect_size_study(c);
  int total = 0;
  for (bool large : {true, false})
    for (const auto& bin : binned_power(r, large)) total += bin.count;
  CHECK(total == static_cast<int>(r.records.size()));
}
