#include "selclust/interval_set.hpp"

#include <algorithm>
#include <cmath>

namespace selclust {

bool Interval::empty() const {
  if (lo > hi || lo == kInfinity) return true;
  return lo == hi && (lo_open || hi_open);
}

bool Interval::contains(double v) const {
  const bool above = v > lo || (!lo_open && v == lo);
  const bool below = v < hi || (!hi_open && v == hi);
  return above && below;
}

IntervalSet::IntervalSet(std::vector<Interval> pieces) {
  std::vector<Interval> clipped;
  clipped.reserve(pieces.size());
  for (Interval p : pieces) {
    if (std::isnan(p.lo) || std::isnan(p.hi)) continue;
    if (p.lo < 0.0) {
      p.lo = 0.0;
      p.lo_open = false;
    }
    if (p.hi == kInfinity) p.hi_open = true;
    if (!p.empty()) clipped.push_back(p);
  }
  std::sort(clipped.begin(), clipped.end(), [](const Interval& a, const Interval& b) {
    if (a.lo != b.lo) return a.lo < b.lo;
    return !a.lo_open && b.lo_open;
  });
  for (const Interval& p : clipped) {
    if (!pieces_.empty()) {
      Interval& cur = pieces_.back();
      const bool overlaps = p.lo < cur.hi || (p.lo == cur.hi && (!p.lo_open || !cur.hi_open));
      if (overlaps) {
        if (p.hi > cur.hi) {
          cur.hi = p.hi;
          cur.hi_open = p.hi_open;
        } else if (p.hi == cur.hi) {
          cur.hi_open = cur.hi_open && p.hi_open;
        }
        continue;
      }
    }
    pieces_.push_back(p);
  }
}

IntervalSet IntervalSet::nonnegative_half_line() {
  return IntervalSet({Interval{0.0, kInfinity, false, true}});
}

bool IntervalSet::contains(double v) const { return interval_containing(v) != nullptr; }

const Interval* IntervalSet::interval_containing(double v) const {
  auto it = std::upper_bound(pieces_.begin(), pieces_.end(), v,
                             [](double value, const Interval& p) { return value < p.lo; });
  // `it` is the first piece starting after v; only its predecessor can hold v.
  if (it == pieces_.begin()) return nullptr;
  --it;
  return it->contains(v) ? &*it : nullptr;
}

double IntervalSet::distance_to_boundary(double v) const {
  double best = kInfinity;
  for (const Interval& p : pieces_) {
    best = std::min(best, std::abs(v - p.lo));
    if (std::isfinite(p.hi)) best = std::min(best, std::abs(v - p.hi));
  }
  return best;
}

IntervalSet IntervalSet::intersect(const IntervalSet& other) const {
  std::vector<Interval> out;
  size_t i = 0, j = 0;
  const auto& a = pieces_;
  const auto& b = other.pieces_;
  while (i < a.size() && j < b.size()) {
    Interval r;
    if (a[i].lo > b[j].lo) {
      r.lo = a[i].lo;
      r.lo_open = a[i].lo_open;
    } else if (a[i].lo < b[j].lo) {
      r.lo = b[j].lo;
      r.lo_open = b[j].lo_open;
    } else {
      r.lo = a[i].lo;
      r.lo_open = a[i].lo_open || b[j].lo_open;
    }
    if (a[i].hi < b[j].hi) {
      r.hi = a[i].hi;
      r.hi_open = a[i].hi_open;
    } else if (a[i].hi > b[j].hi) {
      r.hi = b[j].hi;
      r.hi_open = b[j].hi_open;
    } else {
      r.hi = a[i].hi;
      r.hi_open = a[i].hi_open || b[j].hi_open;
    }
    if (!r.empty()) out.push_back(r);
    if (a[i].hi < b[j].hi) {
      ++i;
    } else if (b[j].hi < a[i].hi) {
      ++j;
    } else {
      ++i;
      ++j;
    }
  }
  return IntervalSet(std::move(out));
}

IntervalSet IntervalSet::unite(const IntervalSet& other) const {
  std::vector<Interval> all = pieces_;
  all.insert(all.end(), other.pieces_.begin(), other.pieces_.end());
  return IntervalSet(std::move(all));
}

IntervalSet intersect_all(std::span<const IntervalSet> sets) {
  if (sets.empty()) return IntervalSet::nonnegative_half_line();

  // Coverage bookkeeping at each endpoint v: `at` is the change from the
  // coverage just left of v to the coverage at v, `right` the change to the
  // coverage just right of v.
  struct Event {
    double v;
    int at;
    int right;
  };
  std::vector<Event> events;
  for (const IntervalSet& s : sets) {
    if (s.empty()) return IntervalSet();
    for (const Interval& p : s.intervals()) {
      events.push_back({p.lo, p.lo_open ? 0 : 1, 1});
      if (p.hi != kInfinity) events.push_back({p.hi, p.hi_open ? -1 : 0, -1});
    }
  }
  std::sort(events.begin(), events.end(),
            [](const Event& a, const Event& b) { return a.v < b.v; });

  const int need = static_cast<int>(sets.size());
  std::vector<Interval> out;
  int left = 0;
  size_t e = 0;
  while (e < events.size()) {
    const double v = events[e].v;
    int at = left, right = left;
    for (; e < events.size() && events[e].v == v; ++e) {
      at += events[e].at;
      right += events[e].right;
    }
    if (at == need) out.push_back({v, v, false, false});
    if (right == need) {
      const double next = e < events.size() ? events[e].v : kInfinity;
      out.push_back({v, next, true, true});
    }
    left = right;
  }
  return IntervalSet(std::move(out));
}

}  // namespace selclust
