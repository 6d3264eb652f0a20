#include "statknn/kernels.hpp"

#include <algorithm>
#include <vector>

namespace statknn::kernels {

namespace {

// Fills row `i` of `out` from the distances of x_i to every other row.
void loo_row(const Matrix& train, std::span<const Index> ks, Index i, std::vector<double>& scratch,
             Matrix& out) {
  const Index n = train.rows();
  scratch.clear();
  for (Index j = 0; j < n; ++j) {
    if (j == i) continue;
    scratch.push_back((train.row(i) - train.row(j)).squaredNorm());
  }
  // ks ascending: each nth_element only needs to look right of the previous pivot
  auto lo = scratch.begin();
  for (std::size_t t = 0; t < ks.size(); ++t) {
    auto nth = scratch.begin() + (ks[t] - 1);
    std::nth_element(lo, nth, scratch.end());
    out(i, static_cast<Index>(t)) = *nth;
    lo = nth;
  }
}

}  // namespace

namespace serial {

Vector squared_distances(const Vector& query, const Matrix& train) {
  Vector out(train.rows());
  for (Index i = 0; i < train.rows(); ++i) out[i] = (train.row(i) - query.transpose()).squaredNorm();
  return out;
}

Matrix loo_kth_sq_distances(const Matrix& train, std::span<const Index> ks) {
  Matrix out(train.rows(), static_cast<Index>(ks.size()));
  std::vector<double> scratch;
  scratch.reserve(train.rows());
  for (Index i = 0; i < train.rows(); ++i) loo_row(train, ks, i, scratch, out);
  return out;
}

}  // namespace serial

namespace omp {

Vector squared_distances(const Vector& query, const Matrix& train) {
  const Index n = train.rows();
  Vector out(n);
#pragma omp parallel for schedule(static) if (n > 4096)
  for (Index i = 0; i < n; ++i) out[i] = (train.row(i) - query.transpose()).squaredNorm();
  return out;
}

Matrix loo_kth_sq_distances(const Matrix& train, std::span<const Index> ks) {
  const Index n = train.rows();
  Matrix out(n, static_cast<Index>(ks.size()));
#pragma omp parallel if (n > 64)
  {
    std::vector<double> scratch;
    scratch.reserve(n);
#pragma omp for schedule(dynamic, 16)
    for (Index i = 0; i < n; ++i) loo_row(train, ks, i, scratch, out);
  }
  return out;
}

}  // namespace omp

}  // namespace statknn::kernels
