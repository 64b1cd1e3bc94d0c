#pragma once
// Observable quantities of the matrix-normal model: data matrices, cluster
// index sets, contrast vectors and the one-parameter perturbation x'(phi)
// that moves two clusters apart or together along their mean difference.
//
// Indices are 0-based in this API; the CLI converts to and from 1-based.

#include <Eigen/Dense>

#include <vector>

namespace selclust {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// n x q matrix of finite observations, one row per observation.
class DataMatrix {
 public:
  explicit DataMatrix(RowMatrix values);

  int n() const { return static_cast<int>(values_.rows()); }
  int q() const { return static_cast<int>(values_.cols()); }
  const RowMatrix& values() const { return values_; }
  auto row(int i) const { return values_.row(i); }

  bool operator==(const DataMatrix& other) const { return values_ == other.values_; }

 private:
  RowMatrix values_;
};

/// Sorted, duplicate-free, nonempty set of observation indices.
class ClusterSet {
 public:
  explicit ClusterSet(std::vector<int> members);

  const std::vector<int>& members() const { return members_; }
  int size() const { return static_cast<int>(members_.size()); }
  int smallest() const { return members_.front(); }
  bool contains(int i) const;

  auto begin() const { return members_.begin(); }
  auto end() const { return members_.end(); }
  bool operator==(const ClusterSet&) const = default;
  auto operator<=>(const ClusterSet&) const = default;

 private:
  std::vector<int> members_;
};

/// Two disjoint clusters; checked against n at construction.
class ClusterPair {
 public:
  ClusterPair(ClusterSet c1, ClusterSet c2, int n);

  const ClusterSet& first() const { return c1_; }
  const ClusterSet& second() const { return c2_; }

  /// +1 for members of the first cluster, -1 for the second, 0 otherwise.
  int side(int i) const;

 private:
  ClusterSet c1_;
  ClusterSet c2_;
  std::vector<signed char> side_;
};

struct ContrastVector {
  Vector entries;
  double squared_norm = 0.0;  // 1/|c1| + 1/|c2|
};

Vector empirical_mean(const DataMatrix& x, const ClusterSet& g);

ContrastVector contrast_vector(const ClusterPair& pair, int n);

/// w / ||w||, or the zero vector when w == 0.
Vector direction(const Vector& w);

/// (I - nu nu^T / ||nu||^2) x. Throws invalid_contrast on a zero nu.
RowMatrix project_out(const RowMatrix& x, const Vector& nu);
DataMatrix project_out(const DataMatrix& x, const ContrastVector& nu);

/// ||mean(c1) - mean(c2)||_2.
double test_statistic(const DataMatrix& x, const ClusterPair& pair);

/// x'(phi): the rows of the two clusters shifted along dir(mean difference)
/// so that their mean difference has norm phi. Rows outside the pair are
/// copied untouched, and phi equal to the observed statistic reproduces x.
DataMatrix perturbed_dataset(const DataMatrix& x, const ClusterPair& pair, double phi);

}  // namespace selclust
