#include "statknn/core_model.hpp"
#include "statknn/error.hpp"

#include <doctest.h>

#include <random>

using namespace statknn;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  Matrix m(static_cast<Index>(r.size()), static_cast<Index>(r.begin()->size()));
  Index i = 0;
  for (auto& row : r) {
    Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Matrix random_matrix(std::mt19937_64& rng, Index r, Index c) {
  std::normal_distribution<double> g;
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

SelectionOutcome outcome_of(std::vector<Index> neighbors, std::vector<int> signs) {
  SelectionOutcome o;
  o.neighbors = std::move(neighbors);
  o.kth_index = o.neighbors.back();
  o.k_star = static_cast<Index>(o.neighbors.size());
  o.signs = std::move(signs);
  return o;
}

}  // namespace

TEST_CASE("concat stacks test then training rows") {
  CHECK(concat(vec({1}), rows({{2}, {3}})).data() == vec({1, 2, 3}));
  CHECK(concat(vec({1, 2}), rows({{3, 4}})).data() == vec({1, 2, 3, 4}));
  CHECK_THROWS_AS(concat(vec({1, 2, 3}), rows({{3, 4}})), Error);

  std::mt19937_64 rng(1);
  const Matrix x = random_matrix(rng, 5, 3);
  const Vector t = random_matrix(rng, 3, 1);
  const auto [t2, x2] = split(concat(t, x));
  CHECK(t2 == t);
  CHECK(x2 == x);
}

TEST_CASE("build_eta places signs on the test and neighbor blocks") {
  const auto e1 = build_eta(outcome_of({0}, {+1}), 1, 1, StatisticKind::L1Norm);
  CHECK(e1.eta == vec({1, -1}));

  const auto e2 = build_eta(outcome_of({1}, {+1, -1}), 2, 2, StatisticKind::L1Norm);
  CHECK(e2.eta == vec({1, -1, 0, 0, -1, 1}));

  const auto e3 = build_eta(outcome_of({0, 1}, {+1, +1}), 3, 2, StatisticKind::ImageMean);
  CHECK(e3.eta == vec({0.5, 0.5, -0.25, -0.25, -0.25, -0.25, 0, 0}));

  CHECK_THROWS_AS(build_eta(outcome_of({4}, {+1}), 2, 1, StatisticKind::L1Norm), Error);
}

TEST_CASE("variance of the L1 statistic under identity noise is d(1 + 1/k)") {
  for (auto [d, k] : {std::pair<Index, Index>{2, 1}, {3, 2}, {4, 5}}) {
    const Index n = 6;
    std::vector<Index> nb;
    for (Index i = 0; i < k; ++i) nb.push_back(i);
    const auto eta = build_eta(outcome_of(nb, std::vector<int>(static_cast<std::size_t>(d), -1)), n, d,
                               StatisticKind::L1Norm);
    // explicit dense block-diagonal product
    const Index len = (n + 1) * d;
    const Eigen::MatrixXd big = Eigen::MatrixXd::Identity(len, len);
    const double dense = eta.eta.dot(big * eta.eta);
    CHECK(dense == doctest::Approx(static_cast<double>(d) * (1.0 + 1.0 / static_cast<double>(k))));
    const Vector y = Vector::Zero(len);
    CHECK(line_params(ConcatVector(y, n, d), eta, Matrix::Identity(d, d)).var == doctest::Approx(dense));
  }
  const auto eta = build_eta(outcome_of({0}, {1, 1}), 3, 2, StatisticKind::L1Norm);
  CHECK(line_params(ConcatVector(Vector::Zero(8), 3, 2), eta, Matrix::Identity(2, 2)).var == doctest::Approx(4.0));
}

TEST_CASE("line_params hand example") {
  StatisticDirection eta{vec({1, -1}), StatisticKind::L1Norm};
  const LineParam line = line_params(ConcatVector(vec({1, 0}), 1, 1), eta, rows({{1}}));
  CHECK(line.var == doctest::Approx(2.0));
  CHECK(line.z_obs == doctest::Approx(1.0));
  CHECK(line.b == vec({0.5, -0.5}));
  CHECK(line.a == vec({0.5, 0.5}));
}

TEST_CASE("line_params rejects a zero direction") {
  StatisticDirection eta{Vector::Zero(2), StatisticKind::L1Norm};
  CHECK_THROWS_AS(line_params(ConcatVector(vec({1, 0}), 1, 1), eta, rows({{1}})), Error);
}

TEST_CASE("line parameterisation identities on random data") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int rep = 0; rep < 50; ++rep) {
    const Index n = 3 + rep % 5, d = 1 + rep % 4, k = 1 + rep % 3;
    const Matrix x = random_matrix(rng, n, d);
    const Vector t = random_matrix(rng, d, 1);
    Matrix a = random_matrix(rng, d, d);
    const Matrix sigma = Matrix::Identity(d, d) + a * a.transpose();
    std::vector<Index> nb;
    for (Index i = 0; i < k; ++i) nb.push_back((rep + 2 * i) % n);
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    auto o = outcome_of(nb, observed_signs(t, x, nb));
    const auto kind = rep % 2 ? StatisticKind::ImageMean : StatisticKind::L1Norm;
    const auto eta = build_eta(o, n, d, kind);
    const auto y = concat(t, x);
    const LineParam line = line_params(y, eta, sigma);

    CHECK((line.a + line.b * line.z_obs - y.data()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(eta.eta.dot(line.a)) < 1e-8);
    CHECK(eta.eta.dot(line.b) == doctest::Approx(1.0).epsilon(1e-10));
    for (int r = 0; r < 10; ++r) {
      const double z = u(rng);
      CHECK(std::abs(eta.eta.dot(line.at(z)) - z) < 1e-8);
    }
    if (kind == StatisticKind::L1Norm) {
      Vector mean = Vector::Zero(d);
      for (Index i : nb) mean += x.row(i).transpose();
      mean /= static_cast<double>(nb.size());
      CHECK(line.z_obs == doctest::Approx((t - mean).lpNorm<1>()));
    }
  }
}

TEST_CASE("variance does not depend on the order of non-neighbor rows") {
  std::mt19937_64 rng(3);
  const Matrix x = random_matrix(rng, 6, 2);
  const Vector t = random_matrix(rng, 2, 1);
  const Matrix sigma = rows({{2, 0.5}, {0.5, 1}});
  const auto o = outcome_of({1, 4}, observed_signs(t, x, {1, 4}));
  const double v1 = line_params(concat(t, x), build_eta(o, 6, 2, StatisticKind::L1Norm), sigma).var;
  Matrix xp = x;
  xp.row(0).swap(xp.row(5));
  xp.row(2).swap(xp.row(3));
  const double v2 = line_params(concat(t, xp), build_eta(o, 6, 2, StatisticKind::L1Norm), sigma).var;
  CHECK(v1 == doctest::Approx(v2).epsilon(1e-14));
}

TEST_CASE("covariance validation") {
  CHECK_NOTHROW(validate_covariance(rows({{1, 0.2}, {0.2, 1}}), 2));
  CHECK_THROWS_AS(validate_covariance(rows({{1, 0.2}, {0.3, 1}}), 2), Error);
  CHECK_THROWS_AS(validate_covariance(rows({{1, 2}, {2, 1}}), 2), Error);
  CHECK_THROWS_AS(validate_covariance(rows({{1}}), 2), Error);
  CHECK_THROWS_AS(Dataset::make(rows({{1, 2}}), Matrix::Identity(2, 2)), Error);
}

TEST_CASE("observed signs map a zero difference to +1") {
  const auto s = observed_signs(vec({1, 2, 3}), rows({{0, 2, 5}}), {0});
  CHECK(s == std::vector<int>{1, 1, -1});
}
