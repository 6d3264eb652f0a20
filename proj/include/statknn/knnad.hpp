#pragma once

// Stage-1 screening: k-NN anomaly score, threshold decision and the
// data-driven choice of k.

#include "statknn/core_model.hpp"
#include "statknn/kernels.hpp"

#include <cmath>
#include <vector>

namespace statknn {

enum class Metric { SquaredL2 };

struct ScreeningConfig {
  // A single entry means k is fixed; several entries are the candidates of
  // the data-driven choice and must be strictly increasing.
  std::vector<Index> ks{1};
  double theta = 0.0;
  Metric metric = Metric::SquaredL2;

  static ScreeningConfig fixed(Index k, double theta) { return {{k}, theta, Metric::SquaredL2}; }
  static ScreeningConfig data_driven(std::vector<Index> candidates, double theta) {
    return {std::move(candidates), theta, Metric::SquaredL2};
  }

  bool is_data_driven() const { return ks.size() > 1; }
  Index max_k() const { return ks.back(); }

  /// Throws Error(Config) unless every k is in [1, n] and the list is strictly increasing.
  void validate(Index n) const;
};

struct Neighbor {
  double sq_dist;
  Index index;
};

struct ScreeningResult {
  SelectionOutcome outcome;
  double score = 0.0;
  bool selected = false;
  std::vector<Neighbor> ranking;        // all n training rows, ascending
  std::vector<double> candidate_scores; // one per config.ks entry
};

/// Ascending squared distances; ties broken by ascending training index.
std::vector<Neighbor> rank_neighbors(const Vector& test, const Matrix& train,
                                     Metric metric = Metric::SquaredL2,
                                     kernels::Execution exec = kernels::Execution::Serial);

/// log(dist_k) - log(k)/d. dist_k is the metric (not squared) distance;
/// zero distance gives -infinity, which never passes a finite threshold.
double anomaly_score(double dist_k, Index k, Index d);

inline double anomaly_score_sq(double sq_dist_k, Index k, Index d) {
  return anomaly_score(std::sqrt(sq_dist_k), k, d);
}

ScreeningResult screen(const Vector& test, const Matrix& train, const ScreeningConfig& config,
                       kernels::Execution exec = kernels::Execution::Serial);

/// Leave-one-out anomaly score of every training row against the remaining
/// n - 1 rows (max over candidates in data-driven mode).
Vector loo_scores(const Matrix& train, const ScreeningConfig& config,
                  kernels::Execution exec = kernels::Execution::Serial);

/// Linear-interpolation empirical quantile (q = 0 -> min, q = 1 -> max).
double empirical_quantile(std::vector<double> values, double q);

/// Threshold at the given quantile of the leave-one-out scores. Fails with
/// Error(Data) when the quantile is not finite (e.g. identical training rows).
double choose_theta(const Matrix& train, const ScreeningConfig& config, double quantile,
                    kernels::Execution exec = kernels::Execution::Serial);

}  // namespace statknn
