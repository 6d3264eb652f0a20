#pragma once

// Exact truncation region: the set of z on which every selection constraint
// holds, as a sorted union of closed (possibly unbounded) intervals.

#include "statknn/selection_events.hpp"

#include <span>
#include <vector>

namespace statknn {

inline constexpr double kTruncationTol = 1e-9;

struct Interval {
  double lo;
  double hi;

  double width() const { return hi - lo; }
  bool contains(double z, double tol = 0.0) const { return z >= lo - tol && z <= hi + tol; }
};

class IntervalUnion {
 public:
  IntervalUnion() = default;

  /// Sorts, merges overlapping intervals or gaps narrower than `tol`, and
  /// drops intervals with lo >= hi.
  static IntervalUnion from(std::vector<Interval> intervals, double tol = kTruncationTol);
  static IntervalUnion full();
  static IntervalUnion empty() { return {}; }

  const std::vector<Interval>& intervals() const { return intervals_; }
  std::size_t size() const { return intervals_.size(); }
  bool is_empty() const { return intervals_.empty(); }
  bool contains(double z, double tol = 0.0) const;

  /// Index of the interval containing z (within tol), or -1.
  std::ptrdiff_t find(double z, double tol = 0.0) const;

  /// Total length (infinite for unbounded unions).
  double measure() const;

  bool operator==(const IntervalUnion&) const = default;

 private:
  std::vector<Interval> intervals_;
};

bool operator==(const Interval& l, const Interval& r);

/// Solution set of alpha z^2 + beta z + gamma <= 0. Coefficients with
/// magnitude <= tol are treated as zero.
IntervalUnion solve_quad(const QuadIneq& q, double tol = kTruncationTol);

IntervalUnion intersect_all(std::span<const IntervalUnion> sets, double tol = kTruncationTol);

/// Intersection of every constraint's solution set. Throws Error(Invariant)
/// if the observed statistic is not inside the result.
IntervalUnion compute_truncation(std::span<const QuadIneq> ineqs, double z_obs, double tol = kTruncationTol);

/// The maximal interval of Z containing z_obs.
IntervalUnion single_interval(const IntervalUnion& z_set, double z_obs, double tol = kTruncationTol);

}  // namespace statknn
