#pragma once

// Small piecewise-linear feature extractor (affine, ReLU, 1-d max-pool).
// Inside the polytope of a fixed activation pattern the network is an affine
// map, which is what lets latent-space kNN distances stay quadratic in z.

#include "statknn/core_model.hpp"
#include "statknn/selection_events.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

namespace statknn::plnet {

struct Affine {
  Matrix weight;  // out x in
  Vector bias;
};

struct Relu {};

struct MaxPool {
  Index window = 2;
  Index stride = 2;
};

using Layer = std::variant<Affine, Relu, MaxPool>;

class Network {
 public:
  /// Throws Error(Config) when layer shapes do not chain or weights are not finite.
  Network(Index input_dim, std::vector<Layer> layers);

  Index input_dim() const { return dims_.front(); }
  Index output_dim() const { return dims_.back(); }
  const std::vector<Layer>& layers() const { return layers_; }

  /// dims()[l] is the width entering layer l; dims().back() is the output width.
  const std::vector<Index>& dims() const { return dims_; }

 private:
  std::vector<Layer> layers_;
  std::vector<Index> dims_;
};

struct ReluMask {
  std::vector<bool> active;
  bool operator==(const ReluMask&) const = default;
};

struct PoolChoice {
  std::vector<Index> argmax;  // absolute input index of each window's winner
  bool operator==(const PoolChoice&) const = default;
};

using LayerPattern = std::variant<std::monostate, ReluMask, PoolChoice>;

struct ActivationPattern {
  std::vector<LayerPattern> layers;
  bool operator==(const ActivationPattern&) const = default;
};

struct ForwardResult {
  Vector latent;
  ActivationPattern pattern;
};

/// A pre-activation of exactly 0 counts as inactive; max-pool ties go to the lowest index.
ForwardResult forward(const Network& net, const Vector& x);

struct AffineMap {
  Matrix weight;  // output_dim x input_dim
  Vector bias;

  Vector apply(const Vector& x) const { return weight * x + bias; }
};

AffineMap affine_map(const Network& net, const ActivationPattern& pattern);

/// Rows of `normals` with `offsets` encode normals.row(r) x + offsets[r] <= 0.
struct Polytope {
  Matrix normals;
  Vector offsets;

  bool contains(const Vector& x, double tol = 0.0) const;
  Vector slack(const Vector& x) const { return normals * x + offsets; }
};

Polytope polytope_ineqs(const Network& net, const ActivationPattern& pattern);

/// Latent-space feature lines: block b moves as W_b (a_b + b_b z) + B_b under
/// its observed pattern.
FeatureLines latent_feature_lines(const Network& net, const LineParam& line,
                                  std::span<const ActivationPattern> patterns);

/// Pattern constraints of every instance block whose input moves along the line.
/// Blocks with zero direction are constant in z and contribute nothing.
std::vector<QuadIneq> dnn_events(const Network& net, const LineParam& line,
                                 std::span<const ActivationPattern> patterns);

nlohmann::json to_json(const Network& net);
Network from_json(const nlohmann::json& j);
Network load(const std::filesystem::path& path);
void save(const Network& net, const std::filesystem::path& path);

struct RandomNetSpec {
  Index input_dim = 8;
  std::vector<Index> hidden{16};
  Index latent_dim = 8;
  Index pool_window = 0;  // 0 disables the trailing max-pool
  std::uint64_t seed = 0;
};

/// He-scaled Gaussian weights, small Gaussian biases.
Network random_network(const RandomNetSpec& spec);

}  // namespace statknn::plnet
