#pragma once
// Finite unions of disjoint intervals of [0, +inf) with open/closed ends.

#include <limits>
#include <span>
#include <vector>

namespace selclust {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct Interval {
  double lo = 0.0;
  double hi = kInfinity;
  bool lo_open = false;
  bool hi_open = true;

  bool empty() const;
  bool contains(double v) const;
  bool operator==(const Interval&) const = default;
};

/// Canonical form: sorted, pairwise disjoint, touching pieces merged, all
/// endpoints >= 0. An upper endpoint at +inf is always open.
class IntervalSet {
 public:
  IntervalSet() = default;
  /// Clips to [0, inf) and canonicalizes.
  explicit IntervalSet(std::vector<Interval> pieces);

  static IntervalSet nonnegative_half_line();
  static IntervalSet empty_set() { return IntervalSet(); }

  const std::vector<Interval>& intervals() const { return pieces_; }
  bool empty() const { return pieces_.empty(); }
  size_t size() const { return pieces_.size(); }
  bool contains(double v) const;

  /// Distance from v to the nearest endpoint (finite ones only); +inf if none.
  double distance_to_boundary(double v) const;

  /// The interval containing v, if any.
  const Interval* interval_containing(double v) const;

  IntervalSet intersect(const IntervalSet& other) const;
  IntervalSet unite(const IntervalSet& other) const;

  bool operator==(const IntervalSet&) const = default;

 private:
  std::vector<Interval> pieces_;
};

/// Intersection of many sets by a single endpoint sweep, O(N log N) in the
/// total number of pieces. The empty list intersects to [0, inf).
IntervalSet intersect_all(std::span<const IntervalSet> sets);

}  // namespace selclust
