#include "statknn/harness.hpp"

#include "statknn/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

namespace statknn::harness {

Rng substream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x5eedu};
  return Rng(seq);
}

void SyntheticSpec::validate() const {
  require(n >= 2, ErrorKind::Config, "n must be at least 2");
  require(d >= 1, ErrorKind::Config, "d must be at least 1");
  require(trials >= 1, ErrorKind::Config, "trials must be at least 1");
  require(delta >= 0.0 && std::isfinite(delta), ErrorKind::Config, "delta must be a finite non-negative number");
  require(theta_quantile >= 0.0 && theta_quantile <= 1.0, ErrorKind::Config, "theta quantile must lie in [0, 1]");
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::Config, "alpha must lie in (0, 1)");
  // calibration is leave-one-out, so every k must also fit in n - 1
  ScreeningConfig{ks, 0.0, Metric::SquaredL2}.validate(n - 1);
  if (net) require(net->input_dim() == d, ErrorKind::Config, "network input dimension does not match d");
}

namespace {

Matrix gaussian_matrix(Rng& rng, Index rows, Index cols) {
  std::normal_distribution<double> g;
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

const char* const kMethodNames[] = {"stat", "wopp", "naive", "bonferroni", "opa1", "opa2"};

std::optional<double> method_p(const TrialRecord& r, std::size_t m) {
  switch (m) {
    case 0: return r.p_selective;
    case 1: return r.p_wopp;
    case 2: return r.p_naive;
    case 3: return r.p_bonferroni;
    case 4: return r.p_opa1;
    case 5: return r.p_opa2;
  }
  return std::nullopt;
}

bool method_on(const MethodSet& ms, std::size_t m) {
  const bool on[] = {ms.stat, ms.wopp, ms.naive, ms.bonferroni, ms.opa1, ms.opa2};
  return on[m];
}

TrialRecord run_one(const RunPlan& plan, const TrialSource& source, std::size_t trial) {
  TrialRecord rec;
  rec.trial = trial;
  Rng rng = substream(plan.seed, trial);
  const TrialData data = source(rng, trial);
  try {
    const Analysis a = analyze(data.test, data.train, plan.sigma, plan.config, plan.options);
    rec.score = a.screening.score;
    rec.screened = a.screening.selected;
    if (a.report) {
      rec.z_obs = a.report->z_obs;
      rec.p_selective = a.report->p_selective;
      rec.p_naive = a.report->p_naive;
      rec.p_bonferroni = a.report->p_bonferroni;
      rec.p_wopp = a.report->p_wopp;
      rec.p_opa1 = a.report->p_opa1;
      rec.p_opa2 = a.report->p_opa2;
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Numerical && e.kind() != ErrorKind::Invariant) throw;
    rec.screened = false;
    rec.error = e.what();
  }
  return rec;
}

void aggregate(ExperimentResult& res, const RunPlan& plan) {
  res.trials_run = res.trials.size();
  res.screened = 0;
  res.failed = 0;
  for (const TrialRecord& r : res.trials) {
    res.screened += r.screened ? 1 : 0;
    res.failed += r.error.empty() ? 0 : 1;
  }
  res.rates_defined = res.screened > 0;
  for (std::size_t m = 0; m < std::size(kMethodNames); ++m) {
    if (!method_on(plan.options.methods, m)) continue;
    MethodStats st;
    for (const TrialRecord& r : res.trials) {
      const auto p = method_p(r, m);
      if (!p) continue;
      ++st.screened;
      st.rejections += *p <= plan.alpha ? 1 : 0;
    }
    if (st.screened > 0) {
      st.rate = static_cast<double>(st.rejections) / static_cast<double>(st.screened);
      st.ci_halfwidth = 1.96 * std::sqrt(st.rate * (1.0 - st.rate) / static_cast<double>(st.screened));
    } else {
      st.rate = std::nan("");
      st.ci_halfwidth = std::nan("");
    }
    res.methods[kMethodNames[m]] = st;
  }
}

}  // namespace

ExperimentResult run_trials(const RunPlan& plan, const TrialSource& source, kernels::Execution exec) {
  require(plan.trials >= 1, ErrorKind::Config, "trials must be at least 1");
  ExperimentResult res;
  res.theta = plan.config.theta;
  const bool until_target = plan.target_screened > 0;
  std::size_t screened = 0;

  auto accept = [&](TrialRecord&& rec) {
    screened += rec.screened ? 1 : 0;
    res.trials.push_back(std::move(rec));
    return until_target && screened >= plan.target_screened;
  };

  if (exec == kernels::Execution::Serial) {
    for (std::size_t t = 0; t < plan.trials; ++t)
      if (accept(run_one(plan, source, t))) break;
  } else {
    const std::size_t batch = 512;
    bool done = false;
    for (std::size_t start = 0; start < plan.trials && !done; start += batch) {
      const std::size_t count = std::min(batch, plan.trials - start);
      std::vector<TrialRecord> recs(count);
#pragma omp parallel for schedule(dynamic, 4)
      for (std::size_t b = 0; b < count; ++b) recs[b] = run_one(plan, source, start + b);
      // ordered reduction: stop at the same trial index as the serial loop
      for (auto& rec : recs)
        if ((done = accept(std::move(rec)))) break;
    }
  }
  aggregate(res, plan);
  return res;
}

double calibrate_theta(const Matrix& calibration_train, const ScreeningConfig& config, double quantile,
                       const plnet::Network* net) {
  if (net == nullptr) return choose_theta(calibration_train, config, quantile);
  Matrix latent(calibration_train.rows(), net->output_dim());
  for (Index i = 0; i < calibration_train.rows(); ++i)
    latent.row(i) = plnet::forward(*net, calibration_train.row(i).transpose()).latent.transpose();
  return choose_theta(latent, config, quantile);
}

namespace {

RunPlan make_plan(const SyntheticSpec& spec, Index d, double theta, Matrix sigma) {
  RunPlan plan;
  plan.trials = spec.trials;
  plan.target_screened = spec.target_screened;
  plan.seed = spec.seed;
  plan.alpha = spec.alpha;
  plan.config = ScreeningConfig{spec.ks, theta, Metric::SquaredL2};
  plan.sigma = sigma.size() ? std::move(sigma) : Matrix(Matrix::Identity(d, d));
  plan.options.kind = spec.kind;
  plan.options.net = spec.net.get();
  plan.options.methods = spec.methods;
  return plan;
}

ExperimentResult run_gaussian(const SyntheticSpec& spec, double delta, kernels::Execution exec) {
  spec.validate();
  Rng cal = substream(spec.seed, kCalibrationStream);
  const Matrix cal_train = gaussian_matrix(cal, spec.n, spec.d);
  const ScreeningConfig cfg{spec.ks, 0.0, Metric::SquaredL2};
  const double theta = calibrate_theta(cal_train, cfg, spec.theta_quantile, spec.net.get());

  const RunPlan plan = make_plan(spec, spec.d, theta, {});
  const Index n = spec.n, d = spec.d;
  auto source = [n, d, delta](Rng& rng, std::size_t) {
    TrialData data;
    data.train = gaussian_matrix(rng, n, d);
    data.test = gaussian_matrix(rng, d, 1);
    data.test.array() += delta;
    return data;
  };
  return run_trials(plan, source, exec);
}

}  // namespace

ExperimentResult run_null(const SyntheticSpec& spec, kernels::Execution exec) {
  return run_gaussian(spec, 0.0, exec);
}

ExperimentResult run_power(const SyntheticSpec& spec, kernels::Execution exec) {
  require(spec.delta > 0.0, ErrorKind::Config, "power experiments need delta > 0");
  return run_gaussian(spec, spec.delta, exec);
}

ExperimentResult run_tabular(const SyntheticSpec& spec, const Matrix& data, kernels::Execution exec) {
  SyntheticSpec s = spec;
  s.d = data.cols();
  s.validate();
  const Index rows = data.rows();
  require(rows >= s.n + 1, ErrorKind::Data,
          "table has " + std::to_string(rows) + " rows, need at least n + 1 = " + std::to_string(s.n + 1));

  auto draw_rows = [rows](Rng& rng, Index count) {
    std::vector<Index> idx(static_cast<std::size_t>(rows));
    std::iota(idx.begin(), idx.end(), Index{0});
    for (Index i = 0; i < count; ++i) {
      std::uniform_int_distribution<Index> pick(i, rows - 1);
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    idx.resize(static_cast<std::size_t>(count));
    return idx;
  };

  Rng cal = substream(s.seed, kCalibrationStream);
  const auto cal_idx = draw_rows(cal, s.n);
  Matrix cal_train(s.n, s.d);
  for (Index i = 0; i < s.n; ++i) cal_train.row(i) = data.row(cal_idx[static_cast<std::size_t>(i)]);
  const double theta = calibrate_theta(cal_train, ScreeningConfig{s.ks, 0.0, Metric::SquaredL2}, s.theta_quantile,
                                       s.net.get());

  const RunPlan plan = make_plan(s, s.d, theta, {});
  const Index n = s.n;
  const double delta = s.delta;
  auto source = [&data, n, delta, draw_rows](Rng& rng, std::size_t) {
    const auto idx = draw_rows(rng, n + 1);
    TrialData t;
    t.test = data.row(idx[0]).transpose();
    t.test.array() += delta;
    t.train.resize(n, data.cols());
    for (Index i = 0; i < n; ++i) t.train.row(i) = data.row(idx[static_cast<std::size_t>(i + 1)]);
    return t;
  };
  return run_trials(plan, source, exec);
}

IngestedCsv ingest_csv(const std::filesystem::path& path, const std::vector<std::string>& feature_columns,
                       const std::optional<std::filesystem::path>& sigma_path) {
  require(std::filesystem::exists(path), ErrorKind::Data, "file not found: " + path.string());
  const io::CsvTable table = io::read_csv(path);
  IngestedCsv out;
  const Matrix raw = io::numeric_columns(table, feature_columns, &out.columns);
  out.standardizer = io::fit_standardizer(raw, out.columns);
  const Matrix sigma = sigma_path ? io::read_matrix_csv(*sigma_path) : Matrix(Matrix::Identity(raw.cols(), raw.cols()));
  out.dataset = Dataset::make(out.standardizer.apply(raw), sigma);
  return out;
}

Vector patchify(const Matrix& image, Index patch, Index row, Index col) {
  require(patch >= 1 && row >= 0 && col >= 0 && row + patch <= image.rows() && col + patch <= image.cols(),
          ErrorKind::Config,
          "patch of size " + std::to_string(patch) + " at (" + std::to_string(row) + ", " + std::to_string(col) +
              ") does not fit a " + std::to_string(image.rows()) + "x" + std::to_string(image.cols()) + " image");
  Vector out(patch * patch);
  for (Index r = 0; r < patch; ++r) out.segment(r * patch, patch) = image.row(row + r).segment(col, patch).transpose();
  return out;
}

std::vector<std::pair<Index, Index>> tile_positions(Index height, Index width, Index patch, Index stride) {
  require(patch >= 1 && stride >= 1, ErrorKind::Config, "patch and stride must be positive");
  std::vector<std::pair<Index, Index>> out;
  for (Index r = 0; r + patch <= height; r += stride)
    for (Index c = 0; c + patch <= width; c += stride) out.emplace_back(r, c);
  return out;
}

Matrix synth_texture(Index height, Index width, std::uint64_t seed) {
  Rng rng = substream(seed, 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix tex = Matrix::Zero(height, width);
  for (int wave = 0; wave < 4; ++wave) {
    const double fr = 0.1 + 0.6 * u(rng), fc = 0.1 + 0.6 * u(rng);
    const double phase = 2.0 * std::numbers::pi * u(rng), amp = 0.5 + 2.0 * u(rng);
    for (Index r = 0; r < height; ++r)
      for (Index c = 0; c < width; ++c) tex(r, c) += amp * std::sin(fr * r + fc * c + phase);
  }
  return tex;
}

ExperimentResult run_image(const ImageSpec& spec, kernels::Execution exec) {
  SyntheticSpec s = spec.base;
  s.d = spec.patch * spec.patch;
  require(spec.noise_sd > 0.0, ErrorKind::Config, "noise_sd must be positive");
  require(spec.row >= 0 && spec.col >= 0 && spec.row + spec.patch <= spec.height && spec.col + spec.patch <= spec.width,
          ErrorKind::Config, "patch position outside the image");
  s.validate();

  const Matrix texture = synth_texture(spec.height, spec.width, spec.texture_seed);
  const double sd = spec.noise_sd;
  auto draw_patch = [&texture, &spec, sd](Rng& rng) {
    Matrix img = texture + sd * gaussian_matrix(rng, texture.rows(), texture.cols());
    return patchify(img, spec.patch, spec.row, spec.col);
  };

  Rng cal = substream(s.seed, kCalibrationStream);
  Matrix cal_train(s.n, s.d);
  for (Index i = 0; i < s.n; ++i) cal_train.row(i) = draw_patch(cal).transpose();
  const double theta = calibrate_theta(cal_train, ScreeningConfig{s.ks, 0.0, Metric::SquaredL2}, s.theta_quantile,
                                       s.net.get());

  const RunPlan plan = make_plan(s, s.d, theta, Matrix(sd * sd * Matrix::Identity(s.d, s.d)));
  const Index n = s.n;
  const Index d = s.d;
  const double delta = s.delta;
  auto source = [draw_patch, n, d, delta](Rng& rng, std::size_t) {
    TrialData t;
    t.train.resize(n, d);
    for (Index i = 0; i < n; ++i) t.train.row(i) = draw_patch(rng).transpose();
    t.test = draw_patch(rng);
    t.test.array() += delta;
    return t;
  };
  return run_trials(plan, source, exec);
}

// ---- result files ----

namespace {

nlohmann::json rate_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

std::string fmt(const std::optional<double>& v) {
  if (!v) return {};
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, *v);
  return std::string(buf, ptr);
}

}  // namespace

nlohmann::json to_json(const ExperimentResult& result) {
  nlohmann::json methods = nlohmann::json::object();
  for (const auto& [name, st] : result.methods) {
    methods[name] = {{"rejections", st.rejections},
                     {"screened", st.screened},
                     {"rate", rate_or_null(st.rate)},
                     {"ci_halfwidth", rate_or_null(st.ci_halfwidth)}};
  }
  return {{"theta", result.theta},       {"trials_run", result.trials_run},
          {"screened", result.screened}, {"failed", result.failed},
          {"rates_defined", result.rates_defined}, {"methods", methods}};
}

nlohmann::json to_json(const SyntheticSpec& spec) {
  return {{"n", spec.n},
          {"d", spec.d},
          {"k", spec.ks},
          {"delta", spec.delta},
          {"trials", spec.trials},
          {"target_screened", spec.target_screened},
          {"seed", spec.seed},
          {"theta_quantile", spec.theta_quantile},
          {"alpha", spec.alpha},
          {"statistic", spec.kind == StatisticKind::L1Norm ? "l1" : "image-mean"},
          {"methods", spec.methods.str()},
          {"latent", static_cast<bool>(spec.net)}};
}

void write_trials_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::Data, "cannot write " + path.string());
  out << "x,trial,screened,z_obs,p_selective,p_naive,p_bonferroni,p_wopp,p_opa1,p_opa2\n";
  for (const SweepRow& row : rows)
    for (const TrialRecord& r : row.result.trials)
      out << fmt(row.x) << ',' << r.trial << ',' << (r.screened ? 1 : 0) << ',' << fmt(r.z_obs) << ','
          << fmt(r.p_selective) << ',' << fmt(r.p_naive) << ',' << fmt(r.p_bonferroni) << ',' << fmt(r.p_wopp)
          << ',' << fmt(r.p_opa1) << ',' << fmt(r.p_opa2) << '\n';
}

void write_plot_csv(const std::filesystem::path& path, const std::string& x_name, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::Data, "cannot write " + path.string());
  std::vector<std::string> names;
  if (!rows.empty())
    for (const auto& [name, st] : rows.front().result.methods) names.push_back(name);
  out << x_name << ",trials,screened";
  for (const auto& name : names) out << ',' << name << ',' << name << "_ci";
  out << '\n';
  for (const SweepRow& row : rows) {
    out << fmt(row.x) << ',' << row.result.trials_run << ',' << row.result.screened;
    for (const auto& name : names) {
      const MethodStats& st = row.result.methods.at(name);
      out << ',' << (std::isfinite(st.rate) ? fmt(st.rate) : "") << ','
          << (std::isfinite(st.ci_halfwidth) ? fmt(st.ci_halfwidth) : "");
    }
    out << '\n';
  }
}

}  // namespace statknn::harness
