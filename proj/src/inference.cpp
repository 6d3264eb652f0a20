#include "statknn/inference.hpp"

#include "statknn/error.hpp"
#include "statknn/normal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace statknn {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double tn_survival(double z_obs, double sigma2, const IntervalUnion& z_set) {
  require(std::isfinite(sigma2) && sigma2 > 0.0, ErrorKind::Numerical, "variance must be positive");
  require(z_set.contains(z_obs, kTruncationTol), ErrorKind::Invariant, "observed statistic outside truncation region");
  const double sd = std::sqrt(sigma2);
  const double z = z_obs / sd;

  double log_num = -kInf;
  double log_den = -kInf;
  for (const Interval& iv : z_set.intervals()) {
    const double lo = iv.lo / sd;
    const double hi = iv.hi / sd;
    log_den = normal::log_add(log_den, normal::log_mass(lo, hi));
    if (hi > z) log_num = normal::log_add(log_num, normal::log_mass(std::max(lo, z), hi));
  }
  require(log_den > -kInf, ErrorKind::Numerical, "truncation region has zero probability mass");
  return std::clamp(std::exp(log_num - log_den), 0.0, 1.0);
}

double naive_p(double z_obs, double sigma2) {
  require(std::isfinite(sigma2) && sigma2 > 0.0, ErrorKind::Numerical, "variance must be positive");
  return std::min(1.0, 2.0 * normal::sf(std::abs(z_obs) / std::sqrt(sigma2)));
}

double bonferroni_p(double p_naive, Index n, Index k) {
  require(k >= 1 && k <= n, ErrorKind::Config, "Bonferroni correction needs 1 <= k <= n");
  if (p_naive <= 0.0) return 0.0;
  const double log_choose = std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
                            std::lgamma(static_cast<double>(n - k) + 1.0);
  return std::min(1.0, std::exp(log_choose + std::log(p_naive)));
}

double wopp_p(double z_obs, double sigma2, const IntervalUnion& z_set) {
  return tn_survival(z_obs, sigma2, single_interval(z_set, z_obs));
}

MethodSet MethodSet::parse(const std::string& list) {
  MethodSet m{false, false, false, false, false, false};
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "stat") m.stat = true;
    else if (item == "wopp") m.wopp = true;
    else if (item == "naive") m.naive = true;
    else if (item == "bonferroni") m.bonferroni = true;
    else if (item == "opa1") m.opa1 = true;
    else if (item == "opa2") m.opa2 = true;
    else if (item == "all") m = MethodSet{true, true, true, true, true, true};
    else fail(ErrorKind::Config, "unknown method '" + item + "'");
  }
  return m;
}

std::string MethodSet::str() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(stat, "stat");
  add(wopp, "wopp");
  add(naive, "naive");
  add(bonferroni, "bonferroni");
  add(opa1, "opa1");
  add(opa2, "opa2");
  return out;
}

Analysis analyze(const Vector& test, const Matrix& train, const Matrix& sigma, const ScreeningConfig& config,
                 const InferenceOptions& options) {
  const Index n = train.rows();
  const Index d = train.cols();
  require(test.size() == d, ErrorKind::Data, "test instance dimension does not match training data");
  validate_covariance(sigma, d);
  const plnet::Network* net = options.net;

  Analysis out;
  std::vector<plnet::ActivationPattern> patterns;
  if (net != nullptr) {
    require(net->input_dim() == d, ErrorKind::Data, "network input dimension does not match data");
    patterns.reserve(static_cast<std::size_t>(n + 1));
    Matrix latent(n, net->output_dim());
    auto fwd = plnet::forward(*net, test);
    const Vector latent_test = fwd.latent;
    patterns.push_back(std::move(fwd.pattern));
    for (Index i = 0; i < n; ++i) {
      fwd = plnet::forward(*net, train.row(i).transpose());
      latent.row(i) = fwd.latent.transpose();
      patterns.push_back(std::move(fwd.pattern));
    }
    out.screening = screen(latent_test, latent, config);
    // the statistic lives in input space even when neighbors come from the latent space
    out.screening.outcome.signs = observed_signs(test, train, out.screening.outcome.neighbors);
  } else {
    out.screening = screen(test, train, config);
  }
  if (!out.screening.selected) return out;

  const SelectionOutcome& outcome = out.screening.outcome;
  PValueReport report;

  StatisticDirection eta = build_eta(outcome, n, d, options.kind);
  const ConcatVector y = concat(test, train);
  LineParam line = line_params(y, eta, sigma);
  if (options.kind == StatisticKind::ImageMean && line.z_obs < 0.0) {
    eta.eta = -eta.eta;
    line = line_params(y, eta, sigma);
    report.eta_flipped = true;
  }
  report.z_obs = line.z_obs;
  report.sigma2 = line.var;

  const FeatureLines lines = net != nullptr ? plnet::latent_feature_lines(*net, line, patterns)
                                            : input_feature_lines(line);
  const Index dim = lines.dim();
  const DistanceQuadratic dq = distance_quadratics(lines);

  std::vector<QuadIneq> knn = se1_events(dq, outcome);
  for (auto&& q : se2_events(dq, outcome, config.theta, outcome.k_star, dim)) knn.push_back(q);
  for (auto&& q : se3_events(line, outcome, options.kind)) knn.push_back(q);
  if (config.is_data_driven()) {
    std::vector<Index> kth;
    for (Index k : config.ks) kth.push_back(out.screening.ranking[static_cast<std::size_t>(k - 1)].index);
    for (auto&& q : kselect_events(dq, kth, outcome.k_star, config.ks, dim)) knn.push_back(q);
    for (auto&& q : candidate_identity_events(dq, out.screening.ranking, config.ks)) knn.push_back(q);
  }
  const std::vector<QuadIneq> dnn = net != nullptr ? plnet::dnn_events(*net, line, patterns) : std::vector<QuadIneq>{};
  std::vector<QuadIneq> sign;
  if (options.kind == StatisticKind::ImageMean) sign.push_back(statistic_sign_event());

  const std::vector<QuadIneq> all = assemble({knn, dnn, sign});
  report.n_inequalities = count_by_tag(all);
  report.truncation = compute_truncation(all, line.z_obs, options.tol);

  const MethodSet& m = options.methods;
  if (m.stat) report.p_selective = tn_survival(line.z_obs, line.var, report.truncation);
  if (m.wopp) report.p_wopp = wopp_p(line.z_obs, line.var, report.truncation);
  if (m.naive || m.bonferroni) {
    const double pn = naive_p(line.z_obs, line.var);
    if (m.naive) report.p_naive = pn;
    if (m.bonferroni) report.p_bonferroni = bonferroni_p(pn, n, outcome.k_star);
  }
  if (m.opa1) {
    const auto ineqs = assemble({dnn, sign});
    report.p_opa1 = tn_survival(line.z_obs, line.var, compute_truncation(ineqs, line.z_obs, options.tol));
  }
  if (m.opa2) {
    const auto ineqs = assemble({knn, sign});
    report.p_opa2 = tn_survival(line.z_obs, line.var, compute_truncation(ineqs, line.z_obs, options.tol));
  }
  out.report = std::move(report);
  return out;
}

PValueReport selective_p(const Vector& test, const Matrix& train, const ScreeningConfig& config,
                         const Matrix& sigma, StatisticKind kind) {
  InferenceOptions options;
  options.kind = kind;
  Analysis a = analyze(test, train, sigma, config, options);
  require(a.report.has_value(), ErrorKind::NotCandidate,
          "not a candidate: anomaly score " + std::to_string(a.screening.score) + " is below theta " +
              std::to_string(config.theta));
  return std::move(*a.report);
}

}  // namespace statknn
