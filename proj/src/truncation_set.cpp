#include "selclust/truncation_set.hpp"

#include "selclust/error.hpp"

#include <algorithm>
#include <cmath>

namespace selclust {

namespace {

constexpr double kNearTie = 1e-9;

IntervalSet linear_gt(double b, double c) {
  // { phi >= 0 : b phi + c > 0 }
  if (b == 0.0 || std::abs(b) < 1e-12 * std::abs(c)) {
    return c > 0.0 ? IntervalSet::nonnegative_half_line() : IntervalSet();
  }
  const double root = -c / b;
  if (b > 0.0) return IntervalSet({Interval{root, kInfinity, true, true}});
  return IntervalSet({Interval{0.0, root, false, true}});
}

bool near_tie(const PhiQuadratic& quad, double stat, double h) {
  const double at_stat = quad(stat);
  return std::abs(at_stat - h) <= kNearTie * std::max(std::abs(h), std::abs(at_stat));
}

ClusterPair require_in_clustering(const MergeHistory& history, const ClusterPair& pair) {
  if (!history.find_final(pair.first()) || !history.find_final(pair.second())) {
    throw Error(ErrorCode::invalid_pair, "tested clusters are not clusters of the K-clustering");
  }
  return pair;
}

// Symmetric table of quadratics over slots.
class QuadraticTable {
 public:
  explicit QuadraticTable(int n) : n_(n), data_(static_cast<size_t>(n) * n) {}
  PhiQuadratic& at(int i, int j) { return i < j ? data_[i * n_ + j] : data_[j * n_ + i]; }

 private:
  size_t n_;
  std::vector<PhiQuadratic> data_;
};

}  // namespace

CovarianceFactor::CovarianceFactor(const Eigen::MatrixXd& sigma) : sigma_(sigma) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0) {
    throw Error(ErrorCode::not_positive_definite, "covariance matrix must be square");
  }
  if (!sigma.allFinite() || !sigma.isApprox(sigma.transpose(), 1e-10)) {
    throw Error(ErrorCode::not_positive_definite, "covariance matrix must be symmetric");
  }
  llt_.compute(sigma);
  if (llt_.info() != Eigen::Success) {
    throw Error(ErrorCode::not_positive_definite, "covariance matrix is not positive definite");
  }
  const auto diag = llt_.matrixL().toDenseMatrix().diagonal();
  if ((diag.array() <= 0.0).any()) {
    throw Error(ErrorCode::not_positive_definite, "covariance matrix is not positive definite");
  }
}

double CovarianceFactor::whitened_norm(const Vector& w) const {
  return llt_.matrixL().solve(w).norm();
}

PerturbationGeometry spherical_geometry(const DataMatrix& x, const ClusterPair& pair) {
  PerturbationGeometry g;
  g.nu = contrast_vector(pair, x.n());
  g.mean_diff = empirical_mean(x, pair.first()) - empirical_mean(x, pair.second());
  g.statistic = g.mean_diff.norm();
  if (g.statistic == 0.0) {
    throw Error(ErrorCode::degenerate_direction,
                "clusters have identical means; the test statistic is zero");
  }
  g.dir = g.mean_diff / g.statistic;
  g.scale = 1.0;
  return g;
}

PerturbationGeometry covariance_geometry(const DataMatrix& x, const ClusterPair& pair,
                                         const CovarianceFactor& sigma) {
  if (sigma.dim() != x.q()) {
    throw Error(ErrorCode::config, "covariance dimension does not match the data");
  }
  PerturbationGeometry g = spherical_geometry(x, pair);
  const double raw = g.statistic;
  g.statistic = sigma.whitened_norm(g.mean_diff);
  g.scale = raw / g.statistic;
  return g;
}

DataMatrix perturbed_dataset(const DataMatrix& x, const PerturbationGeometry& g, double phi) {
  // Row i moves by (phi - s) * scale * (nu_i / ||nu||^2) * dir.
  const double step = (phi - g.statistic) * g.scale / g.nu.squared_norm;
  const Eigen::RowVectorXd shift = step * g.dir.transpose();
  RowMatrix out = x.values();
  for (int i = 0; i < x.n(); ++i) {
    const double w = g.nu.entries[i];
    if (w != 0.0) out.row(i) += w * shift;
  }
  return DataMatrix(std::move(out));
}

PhiQuadratic base_quadratic(const DataMatrix& x, const PerturbationGeometry& g, int i, int j) {
  const double r = (g.nu.entries[i] - g.nu.entries[j]) / g.nu.squared_norm;
  const Vector delta = (x.row(i) - x.row(j)).transpose();
  PhiQuadratic out;
  const double rs = r * g.scale;
  out.a = rs * rs;
  out.b = 2.0 * (rs * g.dir.dot(delta) - out.a * g.statistic);
  out.c = (delta - r * g.mean_diff).squaredNorm();
  return out;
}

PhiQuadratic base_quadratic(const DataMatrix& x, const ContrastVector& nu, int i, int j) {
  if (nu.squared_norm == 0.0 || nu.entries.isZero(0.0)) {
    throw Error(ErrorCode::invalid_contrast, "contrast vector is zero");
  }
  PerturbationGeometry g;
  g.nu = nu;
  g.mean_diff = x.values().transpose() * nu.entries;
  g.statistic = g.mean_diff.norm();
  g.dir = direction(g.mean_diff);
  g.scale = 1.0;
  return base_quadratic(x, g, i, j);
}

PhiQuadratic base_quadratic_cov(const DataMatrix& x, const ContrastVector& nu,
                                const CovarianceFactor& sigma, int i, int j) {
  if (nu.squared_norm == 0.0 || nu.entries.isZero(0.0)) {
    throw Error(ErrorCode::invalid_contrast, "contrast vector is zero");
  }
  PerturbationGeometry g;
  g.nu = nu;
  g.mean_diff = x.values().transpose() * nu.entries;
  const double raw = g.mean_diff.norm();
  g.dir = direction(g.mean_diff);
  g.statistic = sigma.whitened_norm(g.mean_diff);
  g.scale = g.statistic > 0.0 ? raw / g.statistic : 0.0;
  return base_quadratic(x, g, i, j);
}

PhiQuadratic lw_combine(const PhiQuadratic& q13, const PhiQuadratic& q23, const PhiQuadratic& q12,
                        Linkage linkage, int size1, int size2, int size3) {
  const LanceWilliams lw = lance_williams(linkage, size1, size2, size3);
  return {lw.alpha1 * q13.a + lw.alpha2 * q23.a + lw.beta * q12.a,
          lw.alpha1 * q13.b + lw.alpha2 * q23.b + lw.beta * q12.b,
          lw.alpha1 * q13.c + lw.alpha2 * q23.c + lw.beta * q12.c};
}

IntervalSet solve_quadratic_gt(const PhiQuadratic& quad, double h) {
  const double a = quad.a, b = quad.b, c = quad.c - h;
  if (std::abs(a) < 1e-12 * std::max({std::abs(b), std::abs(c), 1.0})) return linear_gt(b, c);

  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) {
    return a > 0.0 ? IntervalSet::nonnegative_half_line() : IntervalSet();
  }
  if (disc == 0.0) {
    if (a < 0.0) return IntervalSet();
    const double root = -b / (2.0 * a);
    return IntervalSet({Interval{0.0, root, false, true}, Interval{root, kInfinity, true, true}});
  }
  // Citardauq-stable pair of roots.
  const double s = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  double r1 = s / a;
  double r2 = s != 0.0 ? c / s : -r1;
  if (r1 > r2) std::swap(r1, r2);
  if (a > 0.0) {
    return IntervalSet({Interval{0.0, r1, false, true}, Interval{r2, kInfinity, true, true}});
  }
  return IntervalSet({Interval{r1, r2, true, true}});
}

TruncationResult truncation_set_lw(const DataMatrix& x, const MergeHistory& history,
                                   const ClusterPair& pair) {
  return truncation_set_lw(x, history, pair, spherical_geometry(x, pair));
}

TruncationResult truncation_set_lw(const DataMatrix& x, const MergeHistory& history,
                                   const ClusterPair& pair, const PerturbationGeometry& g) {
  const Linkage linkage = history.linkage();
  if (!is_lance_williams(linkage)) {
    throw Error(ErrorCode::unsupported_linkage,
                std::string(to_string(linkage)) + " linkage has no Lance-Williams recursion");
  }
  require_in_clustering(history, pair);

  TruncationResult result;
  const int n = x.n();
  const int steps = history.step_count();
  if (steps == 0) {
    result.set = IntervalSet::nonnegative_half_line();
    return result;
  }

  std::vector<IntervalSet> sets;
  sets.reserve(static_cast<size_t>(n) * n);
  auto add_constraint = [&](const PhiQuadratic& quad, int id1, int id2) {
    const auto life = pair_lifetime(history, id1, id2);
    if (!life) return;
    const double h = max_merge_height(history, life->l, life->u);
    result.near_tie = result.near_tie || near_tie(quad, g.statistic, h);
    sets.push_back(solve_quadratic_gt(quad, h));
  };

  QuadraticTable quads(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      quads.at(i, j) = base_quadratic(x, g, i, j);
      add_constraint(quads.at(i, j), i, j);
    }
  }

  std::vector<char> active(n, 1);
  std::vector<int> size(n, 1);
  std::vector<int> id(n);
  for (int i = 0; i < n; ++i) id[i] = i;

  for (int t = 1; t <= steps; ++t) {
    const MergeStep& s = history.step(t);
    const int a = history.members(s.first).smallest();
    const int b = history.members(s.second).smallest();
    const PhiQuadratic qab = quads.at(a, b);
    for (int c = 0; c < n; ++c) {
      if (!active[c] || c == a || c == b) continue;
      quads.at(a, c) = lw_combine(quads.at(a, c), quads.at(b, c), qab, linkage, size[a], size[b],
                                  size[c]);
    }
    active[b] = 0;
    size[a] += size[b];
    id[a] = s.merged;
    if (t + 1 <= steps) {
      for (int c = 0; c < n; ++c) {
        if (active[c] && c != a) add_constraint(quads.at(a, c), s.merged, id[c]);
      }
    }
  }

  result.constraint_count = sets.size();
  result.set = intersect_all(sets);
  return result;
}

TruncationResult truncation_set_single(const DataMatrix& x, const MergeHistory& history,
                                       const ClusterPair& pair) {
  return truncation_set_single(x, history, pair, spherical_geometry(x, pair));
}

TruncationResult truncation_set_single(const DataMatrix& x, const MergeHistory& history,
                                       const ClusterPair& pair, const PerturbationGeometry& g) {
  if (history.linkage() != Linkage::single) {
    throw Error(ErrorCode::unsupported_linkage, "history was not built with single linkage");
  }
  require_in_clustering(history, pair);

  TruncationResult result;
  const int n = x.n();
  const int steps = history.step_count();
  if (steps == 0) {
    result.set = IntervalSet::nonnegative_half_line();
    return result;
  }
  const double h = history.height(steps);
  const auto& label = history.final_labels();
  std::vector<IntervalSet> sets;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (label[i] == label[j]) continue;
      if (pair.side(i) == 0 && pair.side(j) == 0) continue;
      const PhiQuadratic quad = base_quadratic(x, g, i, j);
      result.near_tie = result.near_tie || near_tie(quad, g.statistic, h);
      sets.push_back(solve_quadratic_gt(quad, h));
    }
  }
  result.constraint_count = sets.size();
  result.set = intersect_all(sets);
  return result;
}

TruncationResult truncation_set(const DataMatrix& x, const MergeHistory& history,
                                const ClusterPair& pair, const PerturbationGeometry& g) {
  if (history.linkage() == Linkage::single) return truncation_set_single(x, history, pair, g);
  return truncation_set_lw(x, history, pair, g);
}

std::vector<char> truncation_set_grid_oracle(const DataMatrix& x, Linkage linkage, int k,
                                             const ClusterPair& pair,
                                             const PerturbationGeometry& g,
                                             const std::vector<double>& grid) {
  std::vector<char> member;
  member.reserve(grid.size());
  for (double phi : grid) {
    const MergeHistory h = run_agglomerative(perturbed_dataset(x, g, phi), linkage, k);
    member.push_back(h.find_final(pair.first()) && h.find_final(pair.second()));
  }
  return member;
}

std::vector<char> truncation_set_grid_oracle(const DataMatrix& x, Linkage linkage, int k,
                                             const ClusterPair& pair,
                                             const std::vector<double>& grid) {
  return truncation_set_grid_oracle(x, linkage, k, pair, spherical_geometry(x, pair), grid);
}

std::vector<double> default_oracle_grid(const MergeHistory& history,
                                        const PerturbationGeometry& g, int points) {
  double max_height = 0.0;
  for (const MergeStep& s : history.steps()) max_height = std::max(max_height, s.height);
  const double hi = std::max(4.0 * g.statistic, 2.0 * std::sqrt(max_height) / g.scale);
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i) {
    grid[i] = points > 1 ? hi * i / (points - 1) : 0.0;
  }
  return grid;
}

}  // namespace selclust
