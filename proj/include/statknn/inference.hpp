#pragma once

// Selective p-values for screened anomaly candidates, plus the naive,
// Bonferroni and single-interval (w/o-pp) baselines.

#include "statknn/core_model.hpp"
#include "statknn/knnad.hpp"
#include "statknn/plnet.hpp"
#include "statknn/selection_events.hpp"
#include "statknn/truncation.hpp"

#include <map>
#include <optional>
#include <string>

namespace statknn {

/// P(W >= z_obs | W in Z) for W ~ N(0, sigma2). Interval masses are summed in
/// log space, so Z far in the tail still gives a finite ratio.
double tn_survival(double z_obs, double sigma2, const IntervalUnion& z_set);

/// Two-sided z-test ignoring selection: 2 * P(W >= |z_obs|).
double naive_p(double z_obs, double sigma2);

/// min(1, C(n, k) * p_naive), evaluated in log space.
double bonferroni_p(double p_naive, Index n, Index k);

/// Selective p-value restricted to the interval of Z that contains z_obs.
double wopp_p(double z_obs, double sigma2, const IntervalUnion& z_set);

struct MethodSet {
  bool stat = true;
  bool wopp = true;
  bool naive = true;
  bool bonferroni = true;
  bool opa1 = false;  // drop the kNN events (neighbors, screening, signs, k choice)
  bool opa2 = false;  // drop the network activation events

  /// Parses a comma list of stat|wopp|naive|bonferroni|opa1|opa2 (or "all").
  static MethodSet parse(const std::string& list);
  std::string str() const;
};

struct PValueReport {
  std::optional<double> p_selective;
  std::optional<double> p_naive;
  std::optional<double> p_bonferroni;
  std::optional<double> p_wopp;
  std::optional<double> p_opa1;
  std::optional<double> p_opa2;
  double z_obs = 0.0;
  double sigma2 = 0.0;
  bool eta_flipped = false;  // ImageMean statistic negated to make z_obs >= 0
  IntervalUnion truncation;
  std::map<EventTag, std::size_t> n_inequalities;
};

struct InferenceOptions {
  StatisticKind kind = StatisticKind::L1Norm;
  const plnet::Network* net = nullptr;  // non-null: neighbors found in the network's latent space
  MethodSet methods;
  double tol = kTruncationTol;
};

struct Analysis {
  ScreeningResult screening;
  std::optional<PValueReport> report;  // present iff the instance passed the screen
};

/// Screen one test instance and, if it is a candidate, compute every
/// requested p-value.
Analysis analyze(const Vector& test, const Matrix& train, const Matrix& sigma, const ScreeningConfig& config,
                 const InferenceOptions& options);

/// p-values for an instance that is expected to pass the screen; throws
/// Error(NotCandidate) otherwise.
PValueReport selective_p(const Vector& test, const Matrix& train, const ScreeningConfig& config,
                         const Matrix& sigma, StatisticKind kind);

}  // namespace statknn
