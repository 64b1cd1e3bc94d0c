#pragma once
// Exact computation of the truncation set
//   S = { phi >= 0 : both tested clusters survive clustering of x'(phi) }
// for hierarchical clustering with squared Euclidean dissimilarity, plus a
// brute-force reclustering oracle used to validate it.

#include "selclust/core_model.hpp"
#include "selclust/hclust.hpp"
#include "selclust/interval_set.hpp"

#include <Eigen/Cholesky>

#include <vector>

namespace selclust {

/// d(G, G'; x'(phi)) = a phi^2 + b phi + c.
struct PhiQuadratic {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  double operator()(double phi) const { return (a * phi + b) * phi + c; }
};

/// Positive definite q x q covariance, held through its Cholesky factor.
class CovarianceFactor {
 public:
  /// Throws not_positive_definite if the matrix is not symmetric PD.
  explicit CovarianceFactor(const Eigen::MatrixXd& sigma);

  int dim() const { return static_cast<int>(llt_.matrixLLT().rows()); }
  /// ||Sigma^{-1/2} w||_2, i.e. sqrt(w^T Sigma^{-1} w).
  double whitened_norm(const Vector& w) const;
  const Eigen::MatrixXd& matrix() const { return sigma_; }

 private:
  Eigen::MatrixXd sigma_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

/// Everything about the tested pair that the quadratic coefficients need.
/// For the spherical model `statistic` is ||x^T nu|| and `scale` is 1; under
/// a known covariance `statistic` is ||Sigma^{-1/2} x^T nu|| and `scale` is
/// ||x^T nu|| / statistic.
struct PerturbationGeometry {
  ContrastVector nu;
  Vector mean_diff;  // x^T nu
  Vector dir;        // dir(x^T nu)
  double statistic = 0.0;
  double scale = 1.0;
};

/// Throws degenerate_direction when the cluster means coincide.
PerturbationGeometry spherical_geometry(const DataMatrix& x, const ClusterPair& pair);
PerturbationGeometry covariance_geometry(const DataMatrix& x, const ClusterPair& pair,
                                         const CovarianceFactor& sigma);

/// x'(phi) for either geometry: x + ((phi - s)/s) nu (x^T nu)^T / ||nu||^2.
DataMatrix perturbed_dataset(const DataMatrix& x, const PerturbationGeometry& g, double phi);

PhiQuadratic base_quadratic(const DataMatrix& x, const PerturbationGeometry& g, int i, int j);
/// Spherical coefficients for an arbitrary contrast vector.
PhiQuadratic base_quadratic(const DataMatrix& x, const ContrastVector& nu, int i, int j);
PhiQuadratic base_quadratic_cov(const DataMatrix& x, const ContrastVector& nu,
                                const CovarianceFactor& sigma, int i, int j);

/// alpha1 q13 + alpha2 q23 + beta q12 for a Lance-Williams linkage.
PhiQuadratic lw_combine(const PhiQuadratic& q13, const PhiQuadratic& q23, const PhiQuadratic& q12,
                        Linkage linkage, int size1, int size2, int size3);

/// { phi >= 0 : quad(phi) > h }, open at the roots.
IntervalSet solve_quadratic_gt(const PhiQuadratic& quad, double h);

struct TruncationResult {
  IntervalSet set;
  /// Number of quadratic inequalities intersected.
  size_t constraint_count = 0;
  /// Some constraint is within 1e-9 (relative) of equality at the observed
  /// statistic, i.e. the original clustering had a near tie.
  bool near_tie = false;
};

/// Lance-Williams linkages: intersection over all losing pairs of
/// { d(G, G'; x'(phi)) > h_{G,G'} }, quadratics propagated through the
/// merge tree. Throws invalid_pair if the pair is not in the clustering.
TruncationResult truncation_set_lw(const DataMatrix& x, const MergeHistory& history,
                                   const ClusterPair& pair);
TruncationResult truncation_set_lw(const DataMatrix& x, const MergeHistory& history,
                                   const ClusterPair& pair, const PerturbationGeometry& g);

/// Single linkage: one inequality per cross-cluster observation pair that
/// touches the tested clusters, all against the height of merge n-K.
TruncationResult truncation_set_single(const DataMatrix& x, const MergeHistory& history,
                                       const ClusterPair& pair);
TruncationResult truncation_set_single(const DataMatrix& x, const MergeHistory& history,
                                       const ClusterPair& pair, const PerturbationGeometry& g);

/// Dispatches on the history's linkage; complete linkage throws
/// unsupported_linkage.
TruncationResult truncation_set(const DataMatrix& x, const MergeHistory& history,
                                const ClusterPair& pair, const PerturbationGeometry& g);

/// Reclusters x'(phi) at every grid point and reports whether both clusters
/// of the pair appear among the K clusters.
std::vector<char> truncation_set_grid_oracle(const DataMatrix& x, Linkage linkage, int k,
                                             const ClusterPair& pair,
                                             const PerturbationGeometry& g,
                                             const std::vector<double>& grid);
std::vector<char> truncation_set_grid_oracle(const DataMatrix& x, Linkage linkage, int k,
                                             const ClusterPair& pair,
                                             const std::vector<double>& grid);

/// `points` evenly spaced values on [0, max(4 s, 2 sqrt(max height) / scale)].
std::vector<double> default_oracle_grid(const MergeHistory& history,
                                        const PerturbationGeometry& g, int points = 400);

}  // namespace selclust
