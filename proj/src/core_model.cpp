#include "statknn/core_model.hpp"

#include "statknn/error.hpp"

#include <cmath>
#include <string>

namespace statknn {

void validate_covariance(const Matrix& sigma, Index d) {
  require(sigma.rows() == d && sigma.cols() == d, ErrorKind::Data,
          "covariance must be " + std::to_string(d) + "x" + std::to_string(d));
  require(sigma.allFinite(), ErrorKind::Data, "covariance has non-finite entries");
  require((sigma - sigma.transpose()).cwiseAbs().maxCoeff() <= 1e-10, ErrorKind::Data,
          "covariance is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  require(llt.info() == Eigen::Success, ErrorKind::Data, "covariance is not positive definite");
}

Dataset Dataset::make(Matrix train, Matrix sigma) {
  require(train.rows() >= 2, ErrorKind::Data, "need at least 2 training instances");
  require(train.cols() >= 1, ErrorKind::Data, "training data has no features");
  require(train.allFinite(), ErrorKind::Data, "training data has non-finite entries");
  validate_covariance(sigma, train.cols());
  return Dataset{std::move(train), std::move(sigma)};
}

ConcatVector::ConcatVector(Vector data, Index n, Index d) : data_(std::move(data)), n_(n), d_(d) {
  require(n >= 0 && d >= 1 && data_.size() == (1 + n) * d, ErrorKind::Data,
          "concatenated vector length does not match (1+n)d");
}

ConcatVector concat(const Vector& test, const Matrix& train) {
  require(test.size() == train.cols(), ErrorKind::Data,
          "test instance has " + std::to_string(test.size()) + " features, training data has " +
              std::to_string(train.cols()));
  const Index n = train.rows();
  const Index d = train.cols();
  Vector y((1 + n) * d);
  y.head(d) = test;
  // row-major storage is already the stacked layout
  y.tail(n * d) = Eigen::Map<const Vector>(train.data(), n * d);
  return ConcatVector(std::move(y), n, d);
}

std::pair<Vector, Matrix> split(const ConcatVector& y) {
  Vector test = y.test();
  Matrix train = Eigen::Map<const Matrix>(y.data().data() + y.d(), y.n(), y.d());
  return {std::move(test), std::move(train)};
}

std::vector<int> observed_signs(const Vector& test, const Matrix& train,
                                const std::vector<Index>& neighbors) {
  Vector mean = Vector::Zero(test.size());
  for (Index i : neighbors) mean += train.row(i).transpose();
  mean /= static_cast<double>(neighbors.size());
  std::vector<int> signs(test.size());
  for (Index j = 0; j < test.size(); ++j) signs[j] = (test[j] - mean[j]) < 0.0 ? -1 : 1;
  return signs;
}

StatisticDirection build_eta(const SelectionOutcome& outcome, Index n, Index d, StatisticKind kind) {
  const auto k = static_cast<Index>(outcome.neighbors.size());
  require(k >= 1, ErrorKind::Invariant, "empty neighbor set");
  for (Index i : outcome.neighbors)
    require(i >= 0 && i < n, ErrorKind::Invariant, "neighbor index " + std::to_string(i) + " out of range");

  Vector eta = Vector::Zero((1 + n) * d);
  if (kind == StatisticKind::L1Norm) {
    require(static_cast<Index>(outcome.signs.size()) == d, ErrorKind::Invariant,
            "sign vector length does not match d");
    for (Index j = 0; j < d; ++j) {
      const double s = outcome.signs[j];
      eta[j] = s;
      for (Index i : outcome.neighbors) eta[(i + 1) * d + j] = -s / static_cast<double>(k);
    }
  } else {
    const double w = 1.0 / static_cast<double>(d);
    eta.head(d).setConstant(w);
    for (Index i : outcome.neighbors) eta.segment((i + 1) * d, d).setConstant(-w / static_cast<double>(k));
  }
  return StatisticDirection{std::move(eta), kind};
}

Vector apply_block_covariance(const Matrix& sigma, const Vector& v) {
  const Index d = sigma.rows();
  const Index blocks = v.size() / d;
  Vector out(v.size());
  for (Index b = 0; b < blocks; ++b) {
    auto src = v.segment(b * d, d);
    if (src.isZero(0.0)) {
      out.segment(b * d, d).setZero();
    } else {
      out.segment(b * d, d).noalias() = sigma * src;
    }
  }
  return out;
}

double LineParam::sigma() const { return std::sqrt(var); }

LineParam line_params(const ConcatVector& y, const StatisticDirection& eta, const Matrix& sigma) {
  require(eta.eta.size() == y.data().size(), ErrorKind::Invariant, "eta length does not match data");
  require(sigma.rows() == y.d() && sigma.cols() == y.d(), ErrorKind::Data, "covariance shape mismatch");

  Vector sigma_eta = apply_block_covariance(sigma, eta.eta);
  const double var = eta.eta.dot(sigma_eta);
  require(std::isfinite(var) && var > 0.0, ErrorKind::Numerical,
          "degenerate statistic variance " + std::to_string(var));

  LineParam line;
  line.n = y.n();
  line.d = y.d();
  line.var = var;
  line.b = sigma_eta / var;
  line.z_obs = eta.eta.dot(y.data());
  line.a = y.data() - line.b * line.z_obs;
  return line;
}

}  // namespace statknn
