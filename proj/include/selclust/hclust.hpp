#pragma once
// Agglomerative hierarchical clustering over squared Euclidean
// dissimilarity, recording the merge metadata the truncation-set
// computation consumes: winners, heights, cluster lifetimes, inversions.

#include "selclust/core_model.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace selclust {

enum class Linkage { average, weighted, ward, centroid, median, single, complete };

std::string_view to_string(Linkage linkage);
std::optional<Linkage> parse_linkage(std::string_view name);

/// True for the five linkages with a linear Lance-Williams update.
bool is_lance_williams(Linkage linkage);
/// Centroid and median linkage can produce dendrogram inversions.
bool may_invert(Linkage linkage);

/// Coefficients of d(G1 u G2, G3) = a1 d(G1,G3) + a2 d(G2,G3) + beta d(G1,G2).
struct LanceWilliams {
  double alpha1;
  double alpha2;
  double beta;
};

/// Throws unsupported_linkage for single and complete.
LanceWilliams lance_williams(Linkage linkage, int size1, int size2, int size3);

/// ||x_i - x_j||^2.
double pairwise_dissimilarity(const DataMatrix& x, int i, int j);

/// Full symmetric n x n matrix of squared Euclidean distances.
RowMatrix dissimilarity_matrix(const DataMatrix& x);

/// One merge. Cluster ids: 0..n-1 are singletons, the cluster created at
/// step t (1-based) has id n + t - 1. `first` is the cluster whose smallest
/// member is smaller.
struct MergeStep {
  int first;
  int second;
  int merged;
  double height;
};

/// The first n-K merge steps of an agglomeration plus derived data.
/// Steps are 1-based in every accessor taking or returning a step.
class MergeHistory {
 public:
  MergeHistory(int n, int k, Linkage linkage, std::vector<MergeStep> steps, bool had_ties);

  int n() const { return n_; }
  int k() const { return k_; }
  int step_count() const { return n_ - k_; }
  Linkage linkage() const { return linkage_; }
  bool had_ties() const { return had_ties_; }

  const std::vector<MergeStep>& steps() const { return steps_; }
  const MergeStep& step(int t) const { return steps_[t - 1]; }
  double height(int t) const { return steps_[t - 1].height; }

  int cluster_count() const { return static_cast<int>(members_.size()); }
  const ClusterSet& members(int id) const { return members_[id]; }

  /// l_G: first step at which the cluster exists (only meaningful for
  /// clusters present in some C^(t), t <= n-K).
  int lifetime_start(int id) const { return lifetime_start_[id]; }
  /// u_G: last step at which the cluster exists, capped at n-K.
  int lifetime_end(int id) const { return lifetime_end_[id]; }
  /// Step at which the cluster is merged away, or 0 if it survives step n-K.
  int merged_at(int id) const { return merged_at_[id]; }

  /// M(x) = {t < n-K : height(t) > height(t+1)}, sorted.
  const std::vector<int>& inversion_steps() const { return inversions_; }

  /// The K clusters, each sorted, ordered by smallest member.
  const std::vector<ClusterSet>& final_clusters() const { return final_clusters_; }
  /// Index into final_clusters() for each observation.
  const std::vector<int>& final_labels() const { return final_labels_; }
  /// Cluster ids of the K surviving clusters, in final_clusters() order.
  const std::vector<int>& final_ids() const { return final_ids_; }

  /// Id of the final cluster equal to `g`, if any.
  std::optional<int> find_final(const ClusterSet& g) const;

 private:
  int n_;
  int k_;
  Linkage linkage_;
  bool had_ties_;
  std::vector<MergeStep> steps_;
  std::vector<ClusterSet> members_;
  std::vector<int> lifetime_start_;
  std::vector<int> lifetime_end_;
  std::vector<int> merged_at_;
  std::vector<int> inversions_;
  std::vector<ClusterSet> final_clusters_;
  std::vector<int> final_labels_;
  std::vector<int> final_ids_;
};

/// Runs n-K merge steps with a stored dissimilarity matrix. Exact ties in
/// the argmin go to the lexicographically smallest (smallest-member index)
/// pair and set MergeHistory::had_ties().
MergeHistory run_agglomerative(const DataMatrix& x, Linkage linkage, int k);
MergeHistory run_agglomerative(RowMatrix dissimilarity, Linkage linkage, int k);

std::vector<ClusterSet> cut_clusters(const MergeHistory& history);

/// A pair of coexisting, never-merging clusters and its lifetime [l, u]
/// together with h, the largest merge height over that lifetime.
struct LosingPair {
  int first;   // cluster id
  int second;  // cluster id
  int l;
  int u;
  double h;
};

/// Enumerates L(x) as L_1 plus, for t >= 2, pairs formed by the cluster
/// created at step t-1 with every coexisting cluster except the step-t winner.
std::vector<LosingPair> losing_pairs(const MergeHistory& history);

std::vector<int> inversion_steps(const MergeHistory& history);

/// max height over M(x) restricted to [l, u) together with u.
double max_merge_height(const MergeHistory& history, int l, int u);
double max_merge_height(const MergeHistory& history, const LosingPair& pair);

/// Lifetime of a pair of clusters per the cluster lifetimes; returns
/// nullopt when the pair never coexists as a losing pair.
struct PairLifetime {
  int l;
  int u;
};
std::optional<PairLifetime> pair_lifetime(const MergeHistory& history, int id1, int id2);

/// K-cluster labels by the nearest-neighbour chain algorithm. Only valid for
/// linkages without inversions (single, complete, average, weighted, ward);
/// `dissimilarity` is overwritten. Labels are numbered by smallest member.
std::vector<int> nn_chain_labels(RowMatrix& dissimilarity, Linkage linkage, int k);

}  // namespace selclust
