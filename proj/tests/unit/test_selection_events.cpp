#include "statknn/error.hpp"
#include "statknn/selection_events.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace statknn;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Index r, Index c) {
  std::normal_distribution<double> g;
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

struct Case {
  Vector test;
  Matrix train;
  ScreeningResult screening;
  LineParam line;
  DistanceQuadratic dq;
};

Case make_case(std::mt19937_64& rng, Index n, Index d, std::vector<Index> ks, StatisticKind kind = StatisticKind::L1Norm) {
  Case c;
  c.train = random_matrix(rng, n, d);
  c.test = 2.0 * random_matrix(rng, d, 1);
  ScreeningConfig cfg{ks, -1e300, Metric::SquaredL2};
  c.screening = screen(c.test, c.train, cfg);
  cfg.theta = c.screening.score - 0.1;
  c.screening = screen(c.test, c.train, cfg);
  const auto eta = build_eta(c.screening.outcome, n, d, kind);
  c.line = line_params(concat(c.test, c.train), eta, Matrix::Identity(d, d));
  c.dq = distance_quadratics(c.line);
  return c;
}

bool all_hold(const std::vector<QuadIneq>& qs, double z) {
  return std::all_of(qs.begin(), qs.end(), [z](const QuadIneq& q) { return q.eval(z) <= 1e-9; });
}

LineParam toy_line(double a0, double ai, double b0, double bi) {
  LineParam l;
  l.n = 1;
  l.d = 1;
  l.a = Vector(2);
  l.a << a0, ai;
  l.b = Vector(2);
  l.b << b0, bi;
  l.var = 1.0;
  return l;
}

}  // namespace

TEST_CASE("distance quadratic coefficients") {
  const auto dq = distance_quadratics(toy_line(1, 0, 1, 0));
  CHECK(dq.alpha[0] == 1.0);
  CHECK(dq.beta[0] == 2.0);
  CHECK(dq.gamma[0] == 1.0);

  const auto flat = distance_quadratics(toy_line(3, 1, 0.5, 0.5));
  CHECK(flat.alpha[0] == 0.0);
  CHECK(flat.beta[0] == 0.0);
  CHECK(flat.gamma[0] == 4.0);
}

TEST_CASE("distance quadratics reproduce observed distances") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 100; ++rep) {
    const Case c = make_case(rng, 5 + rep % 10, 1 + rep % 5, {1 + rep % 3});
    for (Index i = 0; i < c.train.rows(); ++i) {
      const double obs = (c.test - c.train.row(i).transpose()).squaredNorm();
      CHECK(c.dq.at(i, c.line.z_obs) == doctest::Approx(obs).epsilon(1e-6));
      CHECK(c.dq.alpha[i] >= 0.0);
    }
  }
}

TEST_CASE("SE1 counts and self-consistency") {
  std::mt19937_64 rng(32);
  const Case c2 = make_case(rng, 2, 2, {1});
  CHECK(se1_events(c2.dq, c2.screening.outcome).size() == 1);
  const Case c5 = make_case(rng, 5, 2, {2});
  const auto ev = se1_events(c5.dq, c5.screening.outcome);
  CHECK(ev.size() == 6);
  CHECK(all_hold(ev, c5.line.z_obs));
  for (const auto& q : ev) CHECK(q.tag == EventTag::SE1);
}

TEST_CASE("SE2 threshold constant") {
  // D_m(z) = (1 + z)^2 for a one-dimensional line; c = e^{2 theta} k^{2/d}
  LineParam l = toy_line(1, 0, 1, 0);
  const auto dq = distance_quadratics(l);
  SelectionOutcome o;
  o.neighbors = {0};
  o.kth_index = 0;
  o.k_star = 1;
  auto ev = se2_events(dq, o, 0.0, 1, 1);
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].tag == EventTag::SE2Threshold);
  CHECK(ev[0].gamma == doctest::Approx(1.0 - 1.0));

  std::mt19937_64 rng(33);
  Case c = make_case(rng, 10, 2, {4});
  const double theta = 0.0;
  ev = se2_events(c.dq, c.screening.outcome, theta, 4, 2);
  const Index m = c.screening.outcome.kth_index;
  const QuadIneq thr = ev.back();
  CHECK(thr.gamma + c.dq.gamma[m] == doctest::Approx(4.0));
}

TEST_CASE("every SE2 constraint holds at the observed point") {
  std::mt19937_64 rng(34);
  for (int rep = 0; rep < 50; ++rep) {
    const Index k = 1 + rep % 4;
    Case c = make_case(rng, 12, 3, {k});
    const double theta = c.screening.score - 0.1;
    const auto ev = se2_events(c.dq, c.screening.outcome, theta, k, 3);
    CHECK(ev.size() == static_cast<std::size_t>((k - 1) + (12 - k) + 1));
    CHECK(all_hold(ev, c.line.z_obs));
  }
}

TEST_CASE("SE3 signs") {
  LineParam l = toy_line(1, 0, 1, 0);
  SelectionOutcome o;
  o.neighbors = {0};
  o.kth_index = 0;
  o.k_star = 1;
  o.signs = {+1};
  const auto ev = se3_events(l, o, StatisticKind::L1Norm);
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].alpha == 0.0);
  CHECK(ev[0].beta == -1.0);
  CHECK(ev[0].gamma == -1.0);
  CHECK(se3_events(l, o, StatisticKind::ImageMean).empty());

  std::mt19937_64 rng(35);
  for (int rep = 0; rep < 30; ++rep) {
    Case c = make_case(rng, 8, 4, {1 + rep % 3});
    auto out = c.screening.outcome;
    const auto good = se3_events(c.line, out, StatisticKind::L1Norm);
    CHECK(good.size() == 4);
    CHECK(all_hold(good, c.line.z_obs));
    const std::size_t j = static_cast<std::size_t>(rep % 4);
    out.signs[j] = -out.signs[j];
    const auto bad = se3_events(c.line, out, StatisticKind::L1Norm);
    for (std::size_t t = 0; t < bad.size(); ++t) {
      if (t == j) CHECK(bad[t].eval(c.line.z_obs) > 0.0);
      else CHECK(bad[t].eval(c.line.z_obs) <= 1e-9);
    }
  }
}

TEST_CASE("k selection events") {
  std::mt19937_64 rng(36);
  Case single = make_case(rng, 10, 2, {3});
  const std::vector<Index> one{3};
  const std::vector<Index> kth{single.screening.outcome.kth_index};
  CHECK(kselect_events(single.dq, kth, 3, one, 2).empty());

  // c_t = (k*/k_t)^{2/d}: with k* = 2, k_t = 1, d = 2 the constraint is D_m* >= 2 D_m1
  DistanceQuadratic dq{Vector::Constant(2, 0.0), Vector::Constant(2, 0.0), Vector(2)};
  dq.gamma << 1.0, 3.0;
  const std::vector<Index> cands{1, 2};
  const std::vector<Index> kths{0, 1};
  const auto ev = kselect_events(dq, kths, 2, cands, 2);
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].gamma == doctest::Approx(2.0 * 1.0 - 3.0));
  CHECK_THROWS_AS(kselect_events(dq, kths, 2, std::vector<Index>{1, 5}, 2), Error);

  for (int rep = 0; rep < 40; ++rep) {
    const std::vector<Index> ks{1, 2, 5, 10};
    Case c = make_case(rng, 25, 2, ks);
    std::vector<Index> m;
    for (Index k : ks) m.push_back(c.screening.ranking[static_cast<std::size_t>(k - 1)].index);
    const auto ks_ev = kselect_events(c.dq, m, c.screening.outcome.k_star, ks, 2);
    CHECK(ks_ev.size() == 3);
    CHECK(all_hold(ks_ev, c.line.z_obs));
    CHECK(all_hold(candidate_identity_events(c.dq, c.screening.ranking, ks), c.line.z_obs));
  }
}

TEST_CASE("assemble removes exact duplicates and keeps the first tag") {
  CHECK(assemble({}).empty());
  std::mt19937_64 rng(37);
  Case c = make_case(rng, 10, 2, {1});
  const auto s1 = se1_events(c.dq, c.screening.outcome);
  const auto s2 = se2_events(c.dq, c.screening.outcome, c.screening.score - 0.1, 1, 2);
  const auto s3 = se3_events(c.line, c.screening.outcome, StatisticKind::L1Norm);
  const auto all = assemble({s1, s2, s3});
  // k = 1: every SE2 ordering constraint repeats an SE1 constraint
  CHECK(all.size() == s1.size() + 1 + s3.size());
  const auto counts = count_by_tag(all);
  CHECK(counts.at(EventTag::SE1) == 9);
  CHECK(counts.count(EventTag::SE2Order) == 0);
  CHECK(counts.at(EventTag::SE2Threshold) == 1);

  for (Index k : {2, 3, 5}) {
    Case ck = make_case(rng, 12, 3, {k});
    const auto a = assemble({se1_events(ck.dq, ck.screening.outcome),
                             se2_events(ck.dq, ck.screening.outcome, 0.0, k, 3),
                             se3_events(ck.line, ck.screening.outcome, StatisticKind::L1Norm)});
    CHECK(a.size() <= static_cast<std::size_t>(k * (12 - k) + (k - 1) + (12 - k) + 1 + 3));
  }
}

TEST_CASE("events are invariant to relabelling non-neighbors") {
  std::mt19937_64 rng(38);
  Case c = make_case(rng, 10, 2, {2});
  const auto& nb = c.screening.outcome.neighbors;
  // swap two non-neighbor rows
  std::vector<Index> others;
  for (Index i = 0; i < 10; ++i)
    if (std::find(nb.begin(), nb.end(), i) == nb.end()) others.push_back(i);
  Matrix x = c.train;
  x.row(others[0]).swap(x.row(others[1]));
  ScreeningConfig cfg{{2}, c.screening.score - 0.1, Metric::SquaredL2};
  const auto s = screen(c.test, x, cfg);
  const auto line = line_params(concat(c.test, x), build_eta(s.outcome, 10, 2, StatisticKind::L1Norm),
                                Matrix::Identity(2, 2));
  const auto dq = distance_quadratics(line);
  auto key = [](std::vector<QuadIneq> v) {
    std::vector<std::tuple<double, double, double>> t;
    for (auto& q : v) t.emplace_back(q.alpha, q.beta, q.gamma);
    std::sort(t.begin(), t.end());
    return t;
  };
  const auto a = key(se1_events(c.dq, c.screening.outcome));
  const auto b = key(se1_events(dq, s.outcome));
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::get<0>(a[i]) == doctest::Approx(std::get<0>(b[i])));
    CHECK(std::get<2>(a[i]) == doctest::Approx(std::get<2>(b[i])));
  }
}
