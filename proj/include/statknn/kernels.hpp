#pragma once

// Data-parallel distance kernels. Every kernel has a plain serial version,
// kept as the reference the OpenMP version is tested against.

#include "statknn/core_model.hpp"

#include <span>

namespace statknn::kernels {

enum class Execution { Serial, Parallel };

namespace serial {

/// ||query - train_i||^2 for every row i.
Vector squared_distances(const Vector& query, const Matrix& train);

/// Leave-one-out k-th nearest squared distance: entry (i, t) is the ks[t]-th
/// smallest of ||x_i - x_j||^2 over j != i. ks must be ascending, ks.back() <= n - 1.
Matrix loo_kth_sq_distances(const Matrix& train, std::span<const Index> ks);

}  // namespace serial

namespace omp {

Vector squared_distances(const Vector& query, const Matrix& train);
Matrix loo_kth_sq_distances(const Matrix& train, std::span<const Index> ks);

}  // namespace omp

inline Vector squared_distances(const Vector& query, const Matrix& train, Execution exec) {
  return exec == Execution::Parallel ? omp::squared_distances(query, train)
                                     : serial::squared_distances(query, train);
}

inline Matrix loo_kth_sq_distances(const Matrix& train, std::span<const Index> ks, Execution exec) {
  return exec == Execution::Parallel ? omp::loo_kth_sq_distances(train, ks)
                                     : serial::loo_kth_sq_distances(train, ks);
}

}  // namespace statknn::kernels
