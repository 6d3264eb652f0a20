#include "statknn/truncation.hpp"

#include "statknn/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace statknn {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

bool operator==(const Interval& l, const Interval& r) { return l.lo == r.lo && l.hi == r.hi; }

IntervalUnion IntervalUnion::from(std::vector<Interval> intervals, double tol) {
  std::sort(intervals.begin(), intervals.end(),
            [](const Interval& l, const Interval& r) { return l.lo < r.lo || (l.lo == r.lo && l.hi < r.hi); });
  IntervalUnion out;
  for (const Interval& iv : intervals) {
    if (!(iv.lo < iv.hi)) continue;
    if (!out.intervals_.empty() && iv.lo - out.intervals_.back().hi < tol) {
      out.intervals_.back().hi = std::max(out.intervals_.back().hi, iv.hi);
    } else {
      out.intervals_.push_back(iv);
    }
  }
  return out;
}

IntervalUnion IntervalUnion::full() { return from({{-kInf, kInf}}); }

std::ptrdiff_t IntervalUnion::find(double z, double tol) const {
  auto it = std::lower_bound(intervals_.begin(), intervals_.end(), z,
                             [tol](const Interval& iv, double v) { return iv.hi + tol < v; });
  if (it != intervals_.end() && it->contains(z, tol)) return it - intervals_.begin();
  return -1;
}

bool IntervalUnion::contains(double z, double tol) const { return find(z, tol) >= 0; }

double IntervalUnion::measure() const {
  double total = 0.0;
  for (const Interval& iv : intervals_) total += iv.width();
  return total;
}

IntervalUnion solve_quad(const QuadIneq& q, double tol) {
  const double a = q.alpha, b = q.beta, c = q.gamma;
  require(std::isfinite(a) && std::isfinite(b) && std::isfinite(c), ErrorKind::Numerical,
          "non-finite constraint coefficients");

  if (std::abs(a) <= tol) {
    if (std::abs(b) <= tol) return c <= tol ? IntervalUnion::full() : IntervalUnion::empty();
    const double root = -c / b;
    return b > 0.0 ? IntervalUnion::from({{-kInf, root}}) : IntervalUnion::from({{root, kInf}});
  }

  double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) {
    // a tangent constraint evaluated in floating point can come out slightly negative
    if (disc < -1e-12 * (b * b + std::abs(4.0 * a * c))) {
      return a > 0.0 ? IntervalUnion::empty() : IntervalUnion::full();
    }
    disc = 0.0;
  }
  const double sq = std::sqrt(disc);
  const double qq = -0.5 * (b + (b >= 0.0 ? sq : -sq));
  double r1, r2;
  if (qq == 0.0) {
    r1 = r2 = 0.0;
  } else {
    r1 = qq / a;
    r2 = c / qq;
  }
  if (r1 > r2) std::swap(r1, r2);

  if (a > 0.0) {
    // a zero-width solution is a single point; keep it as a closed sliver so
    // the observed point is never lost, measure is unaffected
    if (r1 == r2) return IntervalUnion::from({{r1, std::nextafter(r1, kInf)}}, 0.0);
    return IntervalUnion::from({{r1, r2}}, 0.0);
  }
  return IntervalUnion::from({{-kInf, r1}, {r2, kInf}}, 0.0);
}

IntervalUnion intersect_all(std::span<const IntervalUnion> sets, double tol) {
  if (sets.empty()) return IntervalUnion::full();

  // sweep over boundary points: +1 at each left end, -1 at each right end;
  // starts sort before ends at equal coordinates so touching closed
  // intervals still overlap in a point
  struct Event {
    double x;
    int delta;
  };
  std::vector<Event> events;
  for (const IntervalUnion& s : sets) {
    if (s.is_empty()) return IntervalUnion::empty();
    for (const Interval& iv : s.intervals()) {
      events.push_back({iv.lo, +1});
      events.push_back({iv.hi, -1});
    }
  }
  std::sort(events.begin(), events.end(), [](const Event& l, const Event& r) {
    return l.x < r.x || (l.x == r.x && l.delta > r.delta);
  });

  const int need = static_cast<int>(sets.size());
  std::vector<Interval> out;
  int depth = 0;
  double open_at = 0.0;
  for (const Event& e : events) {
    if (e.delta > 0) {
      if (++depth == need) open_at = e.x;
    } else {
      if (depth-- == need) out.push_back({open_at, e.x});
    }
  }
  return IntervalUnion::from(std::move(out), tol);
}

IntervalUnion compute_truncation(std::span<const QuadIneq> ineqs, double z_obs, double tol) {
  std::vector<IntervalUnion> sets;
  sets.reserve(ineqs.size());
  for (const QuadIneq& q : ineqs) {
    IntervalUnion s = solve_quad(q, tol);
    // full-line constraints do not restrict anything
    if (s.size() == 1 && std::isinf(s.intervals()[0].lo) && std::isinf(s.intervals()[0].hi)) continue;
    sets.push_back(std::move(s));
  }
  IntervalUnion z_set = intersect_all(sets, tol);
  if (!z_set.contains(z_obs, tol)) {
    std::ostringstream msg;
    msg << "observed statistic " << z_obs << " lies outside its truncation region";
    for (const QuadIneq& q : ineqs)
      if (q.eval(z_obs) > tol) {
        msg << " (violated " << to_string(q.tag) << " constraint, value " << q.eval(z_obs) << ")";
        break;
      }
    fail(ErrorKind::Invariant, msg.str());
  }
  return z_set;
}

IntervalUnion single_interval(const IntervalUnion& z_set, double z_obs, double tol) {
  const std::ptrdiff_t idx = z_set.find(z_obs, tol);
  require(idx >= 0, ErrorKind::Invariant, "observed statistic outside truncation region");
  return IntervalUnion::from({z_set.intervals()[static_cast<std::size_t>(idx)]}, 0.0);
}

}  // namespace statknn
