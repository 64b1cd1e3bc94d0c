#include "selclust/hclust.hpp"

#include "selclust/error.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

namespace selclust {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double combine(Linkage linkage, double d13, double d23, double d12, int n1, int n2, int n3) {
  switch (linkage) {
    case Linkage::single: return std::min(d13, d23);
    case Linkage::complete: return std::max(d13, d23);
    default: {
      const LanceWilliams lw = lance_williams(linkage, n1, n2, n3);
      return lw.alpha1 * d13 + lw.alpha2 * d23 + lw.beta * d12;
    }
  }
}

void check_k(int n, int k) {
  if (k < 1 || k > n) {
    throw Error(ErrorCode::config,
                "K must lie in [1, " + std::to_string(n) + "], got " + std::to_string(k));
  }
}

}  // namespace

std::string_view to_string(Linkage linkage) {
  switch (linkage) {
    case Linkage::average: return "average";
    case Linkage::weighted: return "weighted";
    case Linkage::ward: return "ward";
    case Linkage::centroid: return "centroid";
    case Linkage::median: return "median";
    case Linkage::single: return "single";
    case Linkage::complete: return "complete";
  }
  return "unknown";
}

std::optional<Linkage> parse_linkage(std::string_view name) {
  for (Linkage l : {Linkage::average, Linkage::weighted, Linkage::ward, Linkage::centroid,
                    Linkage::median, Linkage::single, Linkage::complete}) {
    if (to_string(l) == name) return l;
  }
  return std::nullopt;
}

bool is_lance_williams(Linkage linkage) {
  return linkage != Linkage::single && linkage != Linkage::complete;
}

bool may_invert(Linkage linkage) {
  return linkage == Linkage::centroid || linkage == Linkage::median;
}

LanceWilliams lance_williams(Linkage linkage, int size1, int size2, int size3) {
  const double n1 = size1, n2 = size2, n3 = size3;
  switch (linkage) {
    case Linkage::average: return {n1 / (n1 + n2), n2 / (n1 + n2), 0.0};
    case Linkage::weighted: return {0.5, 0.5, 0.0};
    case Linkage::ward: {
      const double total = n1 + n2 + n3;
      return {(n1 + n3) / total, (n2 + n3) / total, -n3 / total};
    }
    case Linkage::centroid: {
      const double s = n1 + n2;
      return {n1 / s, n2 / s, -n1 * n2 / (s * s)};
    }
    case Linkage::median: return {0.5, 0.5, -0.25};
    case Linkage::single:
    case Linkage::complete:
      break;
  }
  throw Error(ErrorCode::unsupported_linkage,
              std::string(to_string(linkage)) + " linkage has no linear Lance-Williams update");
}

double pairwise_dissimilarity(const DataMatrix& x, int i, int j) {
  return (x.row(i) - x.row(j)).squaredNorm();
}

RowMatrix dissimilarity_matrix(const DataMatrix& x) {
  const int n = x.n();
  RowMatrix d(n, n);
  for (int i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      const double v = pairwise_dissimilarity(x, i, j);
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

MergeHistory::MergeHistory(int n, int k, Linkage linkage, std::vector<MergeStep> steps,
                           bool had_ties)
    : n_(n), k_(k), linkage_(linkage), had_ties_(had_ties), steps_(std::move(steps)) {
  check_k(n, k);
  if (static_cast<int>(steps_.size()) != n - k) {
    throw Error(ErrorCode::config, "merge history must hold exactly n-K steps");
  }
  const int total = n + static_cast<int>(steps_.size());
  members_.reserve(total);
  for (int i = 0; i < n; ++i) members_.emplace_back(std::vector<int>{i});
  lifetime_start_.assign(total, 1);
  merged_at_.assign(total, 0);

  for (int t = 1; t <= step_count(); ++t) {
    const MergeStep& s = steps_[t - 1];
    std::vector<int> joined = members_[s.first].members();
    const auto& other = members_[s.second].members();
    joined.insert(joined.end(), other.begin(), other.end());
    members_.emplace_back(std::move(joined));
    merged_at_[s.first] = t;
    merged_at_[s.second] = t;
    lifetime_start_[n + t - 1] = t + 1;
  }
  lifetime_end_.resize(total);
  for (int id = 0; id < total; ++id) {
    lifetime_end_[id] = merged_at_[id] != 0 ? merged_at_[id] : step_count();
  }
  inversions_ = selclust::inversion_steps(*this);

  for (int id = 0; id < total; ++id) {
    if (merged_at_[id] == 0) final_ids_.push_back(id);
  }
  std::sort(final_ids_.begin(), final_ids_.end(), [this](int a, int b) {
    return members_[a].smallest() < members_[b].smallest();
  });
  final_labels_.assign(n, -1);
  for (size_t c = 0; c < final_ids_.size(); ++c) {
    final_clusters_.push_back(members_[final_ids_[c]]);
    for (int i : members_[final_ids_[c]]) final_labels_[i] = static_cast<int>(c);
  }
}

std::optional<int> MergeHistory::find_final(const ClusterSet& g) const {
  const int label = final_labels_[g.smallest()];
  if (final_clusters_[label] == g) return final_ids_[label];
  return std::nullopt;
}

MergeHistory run_agglomerative(const DataMatrix& x, Linkage linkage, int k) {
  return run_agglomerative(dissimilarity_matrix(x), linkage, k);
}

MergeHistory run_agglomerative(RowMatrix d, Linkage linkage, int k) {
  const int n = static_cast<int>(d.rows());
  check_k(n, k);

  // Slot i holds the cluster whose smallest member is i; merged clusters
  // keep the smaller slot. nn[i] is the best partner j > i of row i.
  std::vector<char> active(n, 1);
  std::vector<int> size(n, 1);
  std::vector<int> id(n);
  std::iota(id.begin(), id.end(), 0);
  std::vector<int> nn(n, -1);
  std::vector<double> nnd(n, kInf);
  std::vector<char> row_tie(n, 0);

  auto rescan = [&](int i) {
    nn[i] = -1;
    nnd[i] = kInf;
    row_tie[i] = 0;
    for (int j = i + 1; j < n; ++j) {
      if (!active[j]) continue;
      const double v = d(i, j);
      if (v < nnd[i]) {
        nnd[i] = v;
        nn[i] = j;
        row_tie[i] = 0;
      } else if (v == nnd[i]) {
        row_tie[i] = 1;
      }
    }
  };
  for (int i = 0; i < n; ++i) rescan(i);

  std::vector<MergeStep> steps;
  steps.reserve(n - k);
  bool had_ties = false;

  for (int t = 1; t <= n - k; ++t) {
    int a = -1;
    double best = kInf;
    bool tie = false;
    for (int i = 0; i < n; ++i) {
      if (!active[i] || nn[i] < 0) continue;
      if (nnd[i] < best) {
        best = nnd[i];
        a = i;
        tie = row_tie[i];
      } else if (nnd[i] == best) {
        tie = true;
      }
    }
    const int b = nn[a];
    had_ties = had_ties || tie;

    const int new_id = n + t - 1;
    steps.push_back({id[a], id[b], new_id, best});

    const int na = size[a], nb = size[b];
    for (int c = 0; c < n; ++c) {
      if (!active[c] || c == a || c == b) continue;
      const double v = combine(linkage, d(a, c), d(b, c), d(a, b), na, nb, size[c]);
      d(a, c) = v;
      d(c, a) = v;
    }
    active[b] = 0;
    size[a] = na + nb;
    id[a] = new_id;

    rescan(a);
    for (int c = 0; c < n; ++c) {
      if (!active[c] || c == a) continue;
      if (c < a) {
        if (nn[c] == a || nn[c] == b) {
          rescan(c);
        } else if (d(c, a) < nnd[c]) {
          nnd[c] = d(c, a);
          nn[c] = a;
          row_tie[c] = 0;
        } else if (d(c, a) == nnd[c]) {
          row_tie[c] = 1;
          nn[c] = std::min(nn[c], a);
        }
      } else if (c < b && nn[c] == b) {
        rescan(c);
      }
    }
  }
  return MergeHistory(n, k, linkage, std::move(steps), had_ties);
}

std::vector<ClusterSet> cut_clusters(const MergeHistory& history) {
  return history.final_clusters();
}

std::vector<int> inversion_steps(const MergeHistory& history) {
  std::vector<int> out;
  for (int t = 1; t < history.step_count(); ++t) {
    if (history.height(t) > history.height(t + 1)) out.push_back(t);
  }
  return out;
}

double max_merge_height(const MergeHistory& history, int l, int u) {
  double h = history.height(u);
  const auto& m = history.inversion_steps();
  for (auto it = std::lower_bound(m.begin(), m.end(), l); it != m.end() && *it < u; ++it) {
    h = std::max(h, history.height(*it));
  }
  return h;
}

double max_merge_height(const MergeHistory& history, const LosingPair& pair) {
  return max_merge_height(history, pair.l, pair.u);
}

std::optional<PairLifetime> pair_lifetime(const MergeHistory& history, int id1, int id2) {
  const int l = std::max(history.lifetime_start(id1), history.lifetime_start(id2));
  int u = std::min(history.lifetime_end(id1), history.lifetime_end(id2));
  const int m1 = history.merged_at(id1);
  if (m1 != 0 && m1 == history.merged_at(id2)) --u;  // this pair wins at step m1
  if (l > u || l > history.step_count()) return std::nullopt;
  return PairLifetime{l, u};
}

std::vector<LosingPair> losing_pairs(const MergeHistory& history) {
  std::vector<LosingPair> out;
  const int n = history.n();
  const int steps = history.step_count();
  if (steps == 0) return out;

  auto emit = [&](int g1, int g2) {
    if (auto life = pair_lifetime(history, g1, g2)) {
      out.push_back({g1, g2, life->l, life->u, max_merge_height(history, life->l, life->u)});
    }
  };

  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) emit(i, j);
  }
  // Clusters alive at step t: replay the merges.
  std::vector<int> alive(n);
  std::iota(alive.begin(), alive.end(), 0);
  for (int t = 2; t <= steps; ++t) {
    const MergeStep& prev = history.step(t - 1);
    std::erase(alive, prev.first);
    std::erase(alive, prev.second);
    for (int other : alive) emit(prev.merged, other);
    alive.push_back(prev.merged);
  }
  return out;
}

std::vector<int> nn_chain_labels(RowMatrix& d, Linkage linkage, int k) {
  const int n = static_cast<int>(d.rows());
  check_k(n, k);
  if (may_invert(linkage)) {
    throw Error(ErrorCode::unsupported_linkage,
                "nearest-neighbour chain requires a linkage without inversions");
  }
  struct Merge {
    int a;
    int b;
    double height;
  };
  std::vector<Merge> merges;
  merges.reserve(n - 1);
  std::vector<char> active(n, 1);
  std::vector<int> size(n, 1);
  std::vector<int> chain;
  chain.reserve(n);
  int next_start = 0;

  while (static_cast<int>(merges.size()) < n - 1) {
    if (chain.empty()) {
      while (!active[next_start]) ++next_start;
      chain.push_back(next_start);
    }
    for (;;) {
      const int a = chain.back();
      const int prev = chain.size() >= 2 ? chain[chain.size() - 2] : -1;
      int b = prev;
      double best = prev >= 0 ? d(a, prev) : kInf;
      for (int j = 0; j < n; ++j) {
        if (!active[j] || j == a) continue;
        if (d(a, j) < best) {
          best = d(a, j);
          b = j;
        }
      }
      if (b == prev) {
        chain.pop_back();
        chain.pop_back();
        const int keep = std::min(a, b), drop = std::max(a, b);
        merges.push_back({keep, drop, best});
        const int nk = size[keep], nd = size[drop];
        for (int c = 0; c < n; ++c) {
          if (!active[c] || c == keep || c == drop) continue;
          const double v = combine(linkage, d(keep, c), d(drop, c), d(keep, drop), nk, nd, size[c]);
          d(keep, c) = v;
          d(c, keep) = v;
        }
        active[drop] = 0;
        size[keep] = nk + nd;
        break;
      }
      chain.push_back(b);
    }
  }

  std::stable_sort(merges.begin(), merges.end(),
                   [](const Merge& x, const Merge& y) { return x.height < y.height; });
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };
  for (int s = 0; s < n - k; ++s) {
    const int ra = find(merges[s].a), rb = find(merges[s].b);
    parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  // Roots are smallest members, so ordering roots numbers clusters by smallest member.
  std::vector<int> label(n, -1), root_label(n, -1);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    const int r = find(i);
    if (root_label[r] < 0) root_label[r] = next++;
    label[i] = root_label[r];
  }
  return label;
}

}  // namespace selclust
