#include "statknn/knnad.hpp"

#include "statknn/error.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace statknn {

void ScreeningConfig::validate(Index n) const {
  require(!ks.empty(), ErrorKind::Config, "no k given");
  for (std::size_t t = 0; t < ks.size(); ++t) {
    require(ks[t] >= 1 && ks[t] <= n, ErrorKind::Config,
            "k = " + std::to_string(ks[t]) + " outside [1, " + std::to_string(n) + "]");
    if (t > 0) require(ks[t] > ks[t - 1], ErrorKind::Config, "k candidates must be strictly increasing");
  }
  require(!std::isnan(theta), ErrorKind::Config, "theta is NaN");
}

std::vector<Neighbor> rank_neighbors(const Vector& test, const Matrix& train, Metric,
                                     kernels::Execution exec) {
  require(test.size() == train.cols(), ErrorKind::Data, "test/train dimension mismatch");
  const Vector dist = kernels::squared_distances(test, train, exec);
  std::vector<Neighbor> out(dist.size());
  for (Index i = 0; i < dist.size(); ++i) out[i] = {dist[i], i};
  std::sort(out.begin(), out.end(), [](const Neighbor& l, const Neighbor& r) {
    return l.sq_dist < r.sq_dist || (l.sq_dist == r.sq_dist && l.index < r.index);
  });
  return out;
}

double anomaly_score(double dist_k, Index k, Index d) {
  if (dist_k <= 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(dist_k) - std::log(static_cast<double>(k)) / static_cast<double>(d);
}

ScreeningResult screen(const Vector& test, const Matrix& train, const ScreeningConfig& config,
                       kernels::Execution exec) {
  const Index n = train.rows();
  const Index d = train.cols();
  config.validate(n);

  ScreeningResult res;
  res.ranking = rank_neighbors(test, train, config.metric, exec);

  res.candidate_scores.reserve(config.ks.size());
  std::size_t best = 0;
  for (std::size_t t = 0; t < config.ks.size(); ++t) {
    const Index k = config.ks[t];
    res.candidate_scores.push_back(anomaly_score_sq(res.ranking[k - 1].sq_dist, k, d));
    // strict '>' keeps the smallest k on ties
    if (res.candidate_scores[t] > res.candidate_scores[best]) best = t;
  }

  const Index k_star = config.ks[best];
  auto& out = res.outcome;
  out.k_star = k_star;
  out.neighbors.reserve(k_star);
  for (Index r = 0; r < k_star; ++r) out.neighbors.push_back(res.ranking[r].index);
  out.kth_index = out.neighbors.back();
  out.signs = observed_signs(test, train, out.neighbors);
  if (config.is_data_driven()) out.candidates = config.ks;

  res.score = res.candidate_scores[best];
  res.selected = res.score >= config.theta;
  return res;
}

Vector loo_scores(const Matrix& train, const ScreeningConfig& config, kernels::Execution exec) {
  const Index n = train.rows();
  const Index d = train.cols();
  require(n >= 2, ErrorKind::Data, "leave-one-out scores need n >= 2");
  config.validate(n - 1);

  const Matrix kth = kernels::loo_kth_sq_distances(train, config.ks, exec);
  Vector scores(n);
  for (Index i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < config.ks.size(); ++t)
      best = std::max(best, anomaly_score_sq(kth(i, static_cast<Index>(t)), config.ks[t], d));
    scores[i] = best;
  }
  return scores;
}

double empirical_quantile(std::vector<double> values, double q) {
  require(!values.empty(), ErrorKind::Data, "quantile of empty sample");
  require(q >= 0.0 && q <= 1.0, ErrorKind::Config, "quantile must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return values[lo];
  return values[lo] + frac * (values[hi] - values[lo]);
}

double choose_theta(const Matrix& train, const ScreeningConfig& config, double quantile,
                    kernels::Execution exec) {
  const Vector scores = loo_scores(train, config, exec);
  const double theta = empirical_quantile({scores.begin(), scores.end()}, quantile);
  require(std::isfinite(theta), ErrorKind::Data,
          "degenerate training data: leave-one-out score quantile is not finite");
  return theta;
}

}  // namespace statknn
