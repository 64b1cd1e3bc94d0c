#include "selclust/core_model.hpp"

#include "selclust/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace selclust {

DataMatrix::DataMatrix(RowMatrix values) : values_(std::move(values)) {
  if (values_.rows() < 2 || values_.cols() < 1) {
    throw Error(ErrorCode::data, "data matrix needs at least 2 rows and 1 column, got " +
                                     std::to_string(values_.rows()) + "x" +
                                     std::to_string(values_.cols()));
  }
  if (!values_.allFinite()) {
    throw Error(ErrorCode::data, "data matrix contains non-finite entries");
  }
}

ClusterSet::ClusterSet(std::vector<int> members) : members_(std::move(members)) {
  if (members_.empty()) throw Error(ErrorCode::invalid_pair, "cluster must be nonempty");
  std::sort(members_.begin(), members_.end());
  if (std::adjacent_find(members_.begin(), members_.end()) != members_.end()) {
    throw Error(ErrorCode::invalid_pair, "cluster has duplicate indices");
  }
  if (members_.front() < 0) throw Error(ErrorCode::invalid_pair, "negative observation index");
}

bool ClusterSet::contains(int i) const {
  return std::binary_search(members_.begin(), members_.end(), i);
}

ClusterPair::ClusterPair(ClusterSet c1, ClusterSet c2, int n)
    : c1_(std::move(c1)), c2_(std::move(c2)), side_(static_cast<size_t>(n), 0) {
  if (c1_.members().back() >= n || c2_.members().back() >= n) {
    throw Error(ErrorCode::invalid_pair, "cluster index out of range for n=" + std::to_string(n));
  }
  for (int i : c1_) side_[i] = 1;
  for (int i : c2_) {
    if (side_[i] != 0) {
      throw Error(ErrorCode::invalid_pair,
                  "clusters overlap at observation " + std::to_string(i + 1));
    }
    side_[i] = -1;
  }
}

int ClusterPair::side(int i) const { return side_[i]; }

Vector empirical_mean(const DataMatrix& x, const ClusterSet& g) {
  Vector sum = Vector::Zero(x.q());
  for (int i : g) sum += x.row(i).transpose();
  return sum / static_cast<double>(g.size());
}

ContrastVector contrast_vector(const ClusterPair& pair, int n) {
  ContrastVector nu;
  nu.entries = Vector::Zero(n);
  const double w1 = 1.0 / pair.first().size();
  const double w2 = 1.0 / pair.second().size();
  for (int i : pair.first()) {
    if (i >= n) throw Error(ErrorCode::invalid_pair, "cluster index out of range");
    nu.entries[i] = w1;
  }
  for (int i : pair.second()) {
    if (i >= n) throw Error(ErrorCode::invalid_pair, "cluster index out of range");
    nu.entries[i] = -w2;
  }
  nu.squared_norm = w1 + w2;
  return nu;
}

Vector direction(const Vector& w) {
  const double norm = w.norm();
  if (norm == 0.0) return Vector::Zero(w.size());
  return w / norm;
}

RowMatrix project_out(const RowMatrix& x, const Vector& nu) {
  const double nn = nu.squaredNorm();
  if (nn == 0.0) throw Error(ErrorCode::invalid_contrast, "contrast vector is zero");
  // x - nu (nu^T x) / ||nu||^2
  const Eigen::RowVectorXd loading = (nu.transpose() * x) / nn;
  return x - nu * loading;
}

DataMatrix project_out(const DataMatrix& x, const ContrastVector& nu) {
  return DataMatrix(project_out(x.values(), nu.entries));
}

double test_statistic(const DataMatrix& x, const ClusterPair& pair) {
  return (empirical_mean(x, pair.first()) - empirical_mean(x, pair.second())).norm();
}

DataMatrix perturbed_dataset(const DataMatrix& x, const ClusterPair& pair, double phi) {
  const Vector diff = empirical_mean(x, pair.first()) - empirical_mean(x, pair.second());
  const double stat = diff.norm();
  if (stat == 0.0) {
    throw Error(ErrorCode::degenerate_direction,
                "clusters have identical means; the perturbation direction is undefined");
  }
  const Eigen::RowVectorXd dir = (diff / stat).transpose();
  const double n1 = pair.first().size();
  const double n2 = pair.second().size();
  const double shift = phi - stat;

  RowMatrix out = x.values();
  const Eigen::RowVectorXd up = (n2 / (n1 + n2)) * shift * dir;
  const Eigen::RowVectorXd down = (n1 / (n1 + n2)) * shift * dir;
  for (int i : pair.first()) out.row(i) += up;
  for (int i : pair.second()) out.row(i) -= down;
  return DataMatrix(std::move(out));
}

}  // namespace selclust
