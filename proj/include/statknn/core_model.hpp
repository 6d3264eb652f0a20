#pragma once

// Data model shared by every stage: stacked test/train vectors, the linear
// statistic direction and the one-dimensional line through the data along
// which all selection events are evaluated.

#include <Eigen/Dense>

#include <cstdint>
#include <utility>
#include <vector>

namespace statknn {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class StatisticKind {
  L1Norm,    // sum_j |x_test_j - mean_kNN_j|, linearised by fixing coordinate signs
  ImageMean  // mean over coordinates of x_test - mean_kNN
};

/// Throws Error(Data) unless sigma is d x d, symmetric within 1e-10 and
/// Cholesky-factorisable.
void validate_covariance(const Matrix& sigma, Index d);

/// n training instances (rows) and the known noise covariance of a single instance.
struct Dataset {
  Matrix train;
  Matrix sigma;

  static Dataset make(Matrix train, Matrix sigma);

  Index n() const { return train.rows(); }
  Index d() const { return train.cols(); }
};

/// vec(x_test, x_1, ..., x_n). Block 0 is the test instance, block i + 1 is
/// training row i (training indices are 0-based throughout the library).
class ConcatVector {
 public:
  ConcatVector(Vector data, Index n, Index d);

  Index n() const { return n_; }
  Index d() const { return d_; }
  const Vector& data() const { return data_; }

  auto block(Index b) const { return data_.segment(b * d_, d_); }
  auto test() const { return block(0); }
  auto train_row(Index i) const { return block(i + 1); }

 private:
  Vector data_;
  Index n_;
  Index d_;
};

ConcatVector concat(const Vector& test, const Matrix& train);
std::pair<Vector, Matrix> split(const ConcatVector& y);

/// What the kNN screen selected for one test instance.
struct SelectionOutcome {
  std::vector<Index> neighbors;   // k* training indices by increasing distance
  Index kth_index = -1;           // == neighbors.back()
  std::vector<int> signs;         // sgn(x_test - mean of neighbors), zero mapped to +1
  Index k_star = 0;
  std::vector<Index> candidates;  // empty when k is fixed
};

/// sgn(test - mean(train[neighbors])) per coordinate; an exact zero maps to +1.
std::vector<int> observed_signs(const Vector& test, const Matrix& train,
                                const std::vector<Index>& neighbors);

struct StatisticDirection {
  Vector eta;
  StatisticKind kind = StatisticKind::L1Norm;
};

StatisticDirection build_eta(const SelectionOutcome& outcome, Index n, Index d, StatisticKind kind);

/// Sigma-tilde * v where Sigma-tilde is block diagonal with sigma in every d x d block.
Vector apply_block_covariance(const Matrix& sigma, const Vector& v);

/// Y = a + b z with z = eta^T Y; `var` is eta^T Sigma-tilde eta.
struct LineParam {
  Vector a;
  Vector b;
  double var = 0.0;
  double z_obs = 0.0;
  Index n = 0;
  Index d = 0;

  Vector at(double z) const { return a + b * z; }
  auto a_block(Index blk) const { return a.segment(blk * d, d); }
  auto b_block(Index blk) const { return b.segment(blk * d, d); }
  double sigma() const;
};

LineParam line_params(const ConcatVector& y, const StatisticDirection& eta, const Matrix& sigma);

}  // namespace statknn
