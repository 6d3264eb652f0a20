#pragma once

// Every selection event, restricted to the line Y = a + b z, becomes a set of
// constraints alpha z^2 + beta z + gamma <= 0 in the scalar z.

#include "statknn/core_model.hpp"
#include "statknn/knnad.hpp"

#include <initializer_list>
#include <map>
#include <span>
#include <vector>

namespace statknn {

enum class EventTag {
  SE1,           // neighbor set
  SE2Order,      // identity of the k-th neighbor
  SE2Threshold,  // anomaly score above theta
  SE3Sign,       // coordinate signs of the L1 statistic
  KSelect,       // data-driven k
  DNNPolytope,   // activation pattern of every moving instance
  StatSign       // sign of a sign-indefinite statistic
};

const char* to_string(EventTag tag);

struct QuadIneq {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  EventTag tag = EventTag::SE1;

  double eval(double z) const { return (alpha * z + beta) * z + gamma; }
};

/// Per-block feature trajectories: row `blk` of the instance feature vector
/// at z is offset.row(blk) + z * direction.row(blk). Block 0 is the test instance.
/// For input-space kNN these are the blocks of (a, b); for latent-space kNN
/// they are the blocks pushed through each instance's affine map.
struct FeatureLines {
  Matrix offset;
  Matrix direction;

  Index n() const { return offset.rows() - 1; }
  Index dim() const { return offset.cols(); }
};

FeatureLines input_feature_lines(const LineParam& line);

/// D_i(z) = ||x_test(z) - x_i(z)||^2 = alpha_i z^2 + beta_i z + gamma_i.
struct DistanceQuadratic {
  Vector alpha;
  Vector beta;
  Vector gamma;

  Index n() const { return alpha.size(); }
  double at(Index i, double z) const { return (alpha[i] * z + beta[i]) * z + gamma[i]; }
};

DistanceQuadratic distance_quadratics(const FeatureLines& lines);
DistanceQuadratic distance_quadratics(const LineParam& line);

/// D_i - D_j <= 0 for every neighbor i and non-neighbor j.
std::vector<QuadIneq> se1_events(const DistanceQuadratic& dq, const SelectionOutcome& outcome);

/// Ordering around the k-th neighbor m (D_(k') <= D_m for the nearer ones,
/// D_m <= D_j for every non-neighbor) plus the threshold D_m >= e^{2 theta} k^{2/dim}.
std::vector<QuadIneq> se2_events(const DistanceQuadratic& dq, const SelectionOutcome& outcome,
                                 double theta, Index k, Index dim);

/// One linear constraint per coordinate fixing sgn(x_test_j - mean_kNN_j).
/// Empty for ImageMean, whose statistic is already linear.
std::vector<QuadIneq> se3_events(const LineParam& line, const SelectionOutcome& outcome,
                                 StatisticKind kind);

/// Score comparison score(k*) >= score(k_t) for every other candidate,
/// given the observed k_t-th neighbor m_t of each candidate.
std::vector<QuadIneq> kselect_events(const DistanceQuadratic& dq, std::span<const Index> kth_per_candidate,
                                     Index k_star, std::span<const Index> candidates, Index dim);

/// Fixes, for every candidate k_t, which training row is its k_t-th neighbor:
/// the observed k_t - 1 nearest stay nearer and everything else stays farther.
std::vector<QuadIneq> candidate_identity_events(const DistanceQuadratic& dq,
                                                std::span<const Neighbor> ranking,
                                                std::span<const Index> candidates);

/// -z <= 0: the statistic keeps its observed (non-negative) sign.
QuadIneq statistic_sign_event();

/// Concatenation with exact-duplicate (alpha, beta, gamma) triples removed;
/// the first occurrence, and its tag, wins.
std::vector<QuadIneq> assemble(std::initializer_list<std::span<const QuadIneq>> lists);

std::map<EventTag, std::size_t> count_by_tag(std::span<const QuadIneq> ineqs);

}  // namespace statknn
