#include "statknn/selection_events.hpp"

#include "statknn/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

namespace statknn {

const char* to_string(EventTag tag) {
  switch (tag) {
    case EventTag::SE1: return "SE1";
    case EventTag::SE2Order: return "SE2Order";
    case EventTag::SE2Threshold: return "SE2Threshold";
    case EventTag::SE3Sign: return "SE3Sign";
    case EventTag::KSelect: return "KSelect";
    case EventTag::DNNPolytope: return "DNNPolytope";
    case EventTag::StatSign: return "StatSign";
  }
  return "?";
}

FeatureLines input_feature_lines(const LineParam& line) {
  const Index blocks = line.n + 1;
  return FeatureLines{Eigen::Map<const Matrix>(line.a.data(), blocks, line.d),
                      Eigen::Map<const Matrix>(line.b.data(), blocks, line.d)};
}

DistanceQuadratic distance_quadratics(const FeatureLines& lines) {
  const Index n = lines.n();
  DistanceQuadratic dq{Vector(n), Vector(n), Vector(n)};
  for (Index i = 0; i < n; ++i) {
    const auto da = lines.offset.row(0) - lines.offset.row(i + 1);
    const auto db = lines.direction.row(0) - lines.direction.row(i + 1);
    dq.alpha[i] = db.squaredNorm();
    dq.beta[i] = 2.0 * da.dot(db);
    dq.gamma[i] = da.squaredNorm();
  }
  return dq;
}

DistanceQuadratic distance_quadratics(const LineParam& line) {
  return distance_quadratics(input_feature_lines(line));
}

namespace {

// D_lhs - D_rhs <= 0
QuadIneq nearer(const DistanceQuadratic& dq, Index lhs, Index rhs, EventTag tag) {
  return {dq.alpha[lhs] - dq.alpha[rhs], dq.beta[lhs] - dq.beta[rhs], dq.gamma[lhs] - dq.gamma[rhs], tag};
}

std::vector<char> membership(Index n, std::span<const Index> members) {
  std::vector<char> in(static_cast<std::size_t>(n), 0);
  for (Index i : members) in[static_cast<std::size_t>(i)] = 1;
  return in;
}

}  // namespace

std::vector<QuadIneq> se1_events(const DistanceQuadratic& dq, const SelectionOutcome& outcome) {
  require(!outcome.neighbors.empty(), ErrorKind::Invariant, "empty neighbor set");
  const Index n = dq.n();
  const auto in = membership(n, outcome.neighbors);
  std::vector<QuadIneq> out;
  out.reserve(outcome.neighbors.size() * static_cast<std::size_t>(n - static_cast<Index>(outcome.neighbors.size())));
  for (Index i : outcome.neighbors)
    for (Index j = 0; j < n; ++j)
      if (!in[j]) out.push_back(nearer(dq, i, j, EventTag::SE1));
  return out;
}

std::vector<QuadIneq> se2_events(const DistanceQuadratic& dq, const SelectionOutcome& outcome,
                                 double theta, Index k, Index dim) {
  require(static_cast<Index>(outcome.neighbors.size()) == k, ErrorKind::Invariant,
          "neighbor list length does not match k");
  const Index n = dq.n();
  const Index m = outcome.kth_index;
  const auto in = membership(n, outcome.neighbors);

  std::vector<QuadIneq> out;
  for (Index r = 0; r + 1 < k; ++r) out.push_back(nearer(dq, outcome.neighbors[r], m, EventTag::SE2Order));
  for (Index j = 0; j < n; ++j)
    if (!in[j]) out.push_back(nearer(dq, m, j, EventTag::SE2Order));

  // log sqrt(D_m) - log(k)/dim >= theta  <=>  D_m >= exp(2 theta) k^{2/dim}
  const double c = std::exp(2.0 * theta) * std::pow(static_cast<double>(k), 2.0 / static_cast<double>(dim));
  out.push_back({-dq.alpha[m], -dq.beta[m], c - dq.gamma[m], EventTag::SE2Threshold});
  return out;
}

std::vector<QuadIneq> se3_events(const LineParam& line, const SelectionOutcome& outcome,
                                 StatisticKind kind) {
  if (kind == StatisticKind::ImageMean) return {};
  const Index d = line.d;
  require(static_cast<Index>(outcome.signs.size()) == d, ErrorKind::Invariant, "sign vector length mismatch");
  const double inv_k = 1.0 / static_cast<double>(outcome.neighbors.size());

  Vector da = line.a_block(0);
  Vector db = line.b_block(0);
  for (Index i : outcome.neighbors) {
    da -= inv_k * line.a_block(i + 1);
    db -= inv_k * line.b_block(i + 1);
  }
  std::vector<QuadIneq> out;
  out.reserve(static_cast<std::size_t>(d));
  for (Index j = 0; j < d; ++j) {
    const double s = outcome.signs[j];
    out.push_back({0.0, -s * db[j], -s * da[j], EventTag::SE3Sign});
  }
  return out;
}

std::vector<QuadIneq> kselect_events(const DistanceQuadratic& dq, std::span<const Index> kth_per_candidate,
                                     Index k_star, std::span<const Index> candidates, Index dim) {
  require(kth_per_candidate.size() == candidates.size(), ErrorKind::Invariant,
          "one k-th neighbor per candidate required");
  const auto star = std::find(candidates.begin(), candidates.end(), k_star);
  require(star != candidates.end(), ErrorKind::Invariant, "k* is not a candidate");
  const Index m_star = kth_per_candidate[static_cast<std::size_t>(star - candidates.begin())];

  std::vector<QuadIneq> out;
  for (std::size_t t = 0; t < candidates.size(); ++t) {
    require(candidates[t] <= dq.n(), ErrorKind::Config, "candidate k exceeds n");
    if (candidates[t] == k_star) continue;
    const Index m_t = kth_per_candidate[t];
    // D_{m*} >= c_t D_{m_t}; both sides non-negative so squaring is exact
    const double c = std::pow(static_cast<double>(k_star) / static_cast<double>(candidates[t]),
                              2.0 / static_cast<double>(dim));
    out.push_back({c * dq.alpha[m_t] - dq.alpha[m_star], c * dq.beta[m_t] - dq.beta[m_star],
                   c * dq.gamma[m_t] - dq.gamma[m_star], EventTag::KSelect});
  }
  return out;
}

std::vector<QuadIneq> candidate_identity_events(const DistanceQuadratic& dq,
                                                std::span<const Neighbor> ranking,
                                                std::span<const Index> candidates) {
  std::vector<QuadIneq> out;
  for (Index k : candidates) {
    require(k >= 1 && k <= static_cast<Index>(ranking.size()), ErrorKind::Config, "candidate k exceeds n");
    const Index m = ranking[static_cast<std::size_t>(k - 1)].index;
    for (Index r = 0; r < k - 1; ++r) out.push_back(nearer(dq, ranking[static_cast<std::size_t>(r)].index, m, EventTag::KSelect));
    for (std::size_t r = static_cast<std::size_t>(k); r < ranking.size(); ++r)
      out.push_back(nearer(dq, m, ranking[r].index, EventTag::KSelect));
  }
  return out;
}

QuadIneq statistic_sign_event() { return {0.0, -1.0, 0.0, EventTag::StatSign}; }

std::vector<QuadIneq> assemble(std::initializer_list<std::span<const QuadIneq>> lists) {
  std::vector<QuadIneq> out;
  std::set<std::tuple<double, double, double>> seen;
  for (auto list : lists)
    for (const QuadIneq& q : list)
      if (seen.emplace(q.alpha, q.beta, q.gamma).second) out.push_back(q);
  return out;
}

std::map<EventTag, std::size_t> count_by_tag(std::span<const QuadIneq> ineqs) {
  std::map<EventTag, std::size_t> counts;
  for (const QuadIneq& q : ineqs) ++counts[q.tag];
  return counts;
}

}  // namespace statknn
