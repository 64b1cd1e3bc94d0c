#include "selclust/core_model.hpp"
#include "selclust/error.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <limits>

using namespace selclust;
using selclust::testing::random_data;

namespace {

RowMatrix rows(std::initializer_list<std::initializer_list<double>> values) {
  RowMatrix m(values.size(), values.begin()->size());
  int i = 0;
  for (const auto& r : values) {
    int j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

double rel_diff(const RowMatrix& a, const RowMatrix& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace

TEST_CASE("data matrix rejects bad shapes and values") {
  CHECK_THROWS_AS(DataMatrix(RowMatrix(1, 2)), Error);
  CHECK_THROWS_AS(DataMatrix(RowMatrix(2, 0)), Error);
  RowMatrix m = rows({{0, 1}, {2, 3}});
  m(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(DataMatrix{m}, Error);
  m(1, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(DataMatrix{m}, Error);
}

TEST_CASE("cluster sets and pairs validate their members") {
  CHECK_THROWS_AS(ClusterSet({}), Error);
  CHECK_THROWS_AS(ClusterSet({1, 1}), Error);
  CHECK(ClusterSet({3, 0, 2}).members() == std::vector<int>{0, 2, 3});
  try {
    ClusterPair(ClusterSet({0, 1}), ClusterSet({1, 2}), 3);
    FAIL("overlap accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_pair);
  }
  CHECK_THROWS_AS(ClusterPair(ClusterSet({0}), ClusterSet({5}), 3), Error);
}

TEST_CASE("empirical mean") {
  DataMatrix x(rows({{0, 0}, {2, 2}}));
  CHECK(empirical_mean(x, ClusterSet({0, 1})).isApprox(Vector::Constant(2, 1.0)));
  CHECK(empirical_mean(x, ClusterSet({1})) == x.row(1).transpose());

  std::mt19937_64 rng(11);
  const DataMatrix y = random_data(rng, 5, 3);
  Vector direct = Vector::Zero(3);
  for (int i : {0, 2, 4})
    for (int j = 0; j < 3; ++j) direct[j] += y.values()(i, j);
  direct /= 3.0;
  CHECK((empirical_mean(y, ClusterSet({0, 2, 4})) - direct).norm() < 1e-15);
}

TEST_CASE("contrast vector") {
  const auto a = contrast_vector(ClusterPair(ClusterSet({0}), ClusterSet({1}), 3), 3);
  CHECK(a.entries == Vector((Vector(3) << 1, -1, 0).finished()));
  CHECK(a.squared_norm == 2.0);
  const auto b = contrast_vector(ClusterPair(ClusterSet({0, 1}), ClusterSet({2, 3}), 4), 4);
  CHECK(b.entries == Vector((Vector(4) << 0.5, 0.5, -0.5, -0.5).finished()));

  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 200; ++rep) {
    const DataMatrix x = random_data(rng, 9, 4);
    std::vector<int> c1, c2;
    for (int i = 0; i < 9; ++i) {
      const auto r = rng() % 3;
      if (r == 0) c1.push_back(i);
      if (r == 1) c2.push_back(i);
    }
    if (c1.empty() || c2.empty()) continue;
    const ClusterPair pair(ClusterSet(c1), ClusterSet(c2), 9);
    const auto nu = contrast_vector(pair, 9);
    CHECK(std::abs(nu.entries.sum()) < 1e-14);
    CHECK(std::abs(nu.squared_norm - nu.entries.squaredNorm()) <= 1e-12 * nu.squared_norm);
    const Vector w = x.values().transpose() * nu.entries;
    const Vector diff = empirical_mean(x, pair.first()) - empirical_mean(x, pair.second());
    CHECK((w - diff).norm() < 1e-13);
  }
}

TEST_CASE("direction") {
  CHECK(direction(Vector((Vector(2) << 3, 4).finished())).isApprox(Vector((Vector(2) << 0.6, 0.8).finished())));
  CHECK(direction(Vector::Zero(2)) == Vector::Zero(2));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 100; ++rep) {
    Vector w(5);
    for (auto& v : w) v = z(rng);
    CHECK(direction(w).norm() == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("project out") {
  const Vector nu = (Vector(4) << 0.5, 0.5, -0.5, -0.5).finished();
  RowMatrix along(4, 1);
  along.col(0) = 3.0 * nu;
  CHECK(project_out(along, nu).norm() < 1e-15);
  RowMatrix orth(4, 2);
  orth << 1, 2, -1, 2, 1, 2, -1, 2;
  CHECK(project_out(orth, nu) == orth);
  CHECK_THROWS_AS(project_out(orth, Vector::Zero(4)), Error);

  std::mt19937_64 rng(9);
  const DataMatrix x = random_data(rng, 8, 3);
  const auto c = contrast_vector(ClusterPair(ClusterSet({0, 3}), ClusterSet({5}), 8), 8);
  const DataMatrix once = project_out(x, c);
  CHECK((once.values().transpose() * c.entries).norm() < 1e-14);
  CHECK(rel_diff(project_out(once, c).values(), once.values()) < 1e-10);
}

TEST_CASE("test statistic") {
  DataMatrix same(rows({{1, 1}, {1, 1}, {5, 5}}));
  CHECK(test_statistic(same, ClusterPair(ClusterSet({0}), ClusterSet({1}), 3)) == 0.0);
  DataMatrix x(rows({{-1, 0}, {1, 0}, {3, 4}}));
  CHECK(test_statistic(x, ClusterPair(ClusterSet({0, 1}), ClusterSet({2}), 3)) == doctest::Approx(5.0));
}

TEST_CASE("perturbed dataset") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 100; ++rep) {
    const DataMatrix x = random_data(rng, 10, 3);
    const ClusterPair pair(ClusterSet({0, 1, 2}), ClusterSet({5, 6}), 10);
    const double stat = test_statistic(x, pair);
    CHECK(perturbed_dataset(x, pair, stat) == x);

    const double phi = 4.0 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const DataMatrix moved = perturbed_dataset(x, pair, phi);
    for (int i : {3, 4, 7, 8, 9}) CHECK(moved.row(i) == x.row(i));
    CHECK(test_statistic(moved, pair) == doctest::Approx(phi).epsilon(1e-12));
    const Vector d0 = empirical_mean(x, pair.first()) - empirical_mean(x, pair.second());
    const Vector d1 = empirical_mean(moved, pair.first()) - empirical_mean(moved, pair.second());
    if (phi > 1e-6) CHECK((direction(d1) - direction(d0)).norm() < 1e-10);

    const auto nu = contrast_vector(pair, 10);
    CHECK(rel_diff(project_out(moved, nu).values(), project_out(x, nu).values()) < 1e-10);
  }

  DataMatrix tied(rows({{1, 1}, {1, 1}, {5, 5}}));
  try {
    perturbed_dataset(tied, ClusterPair(ClusterSet({0}), ClusterSet({1}), 3), 1.0);
    FAIL("zero statistic accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::degenerate_direction);
  }
}
