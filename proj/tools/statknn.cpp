// Command-line front end: detect, experiment, theta, net-gen.
// Reports go to stdout as JSON; errors go to stderr as JSON with a non-zero
// exit code (2 config, 3 data, 4 numerical).

#include "statknn/error.hpp"
#include "statknn/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace statknn;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Data: return 3;
    default: return 4;
  }
}

void print_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json opt(const std::optional<double>& v) { return v ? num(*v) : json(nullptr); }

// Options shared by the subcommands that screen instances.
struct Common {
  std::uint64_t seed = 0;
  double alpha = 0.05;
  Index k = 1;
  std::vector<Index> k_candidates;
  double theta_quantile = 0.95;
  std::string methods = "stat,wopp,naive,bonferroni";
  std::string metric = "squared-l2";
  std::string statistic = "l1";
  std::string net_path;
  std::string out_dir;

  std::vector<Index> ks() const { return k_candidates.empty() ? std::vector<Index>{k} : k_candidates; }

  StatisticKind kind() const {
    if (statistic == "l1") return StatisticKind::L1Norm;
    if (statistic == "image-mean") return StatisticKind::ImageMean;
    fail(ErrorKind::Config, "unknown statistic '" + statistic + "' (expected l1 or image-mean)");
  }

  void check() const {
    require(alpha > 0.0 && alpha < 1.0, ErrorKind::Config, "alpha must lie in (0, 1)");
    require(metric == "squared-l2", ErrorKind::Config, "unsupported metric '" + metric + "' (only squared-l2)");
    require(theta_quantile >= 0.0 && theta_quantile <= 1.0, ErrorKind::Config, "theta quantile must lie in [0, 1]");
    kind();
  }

  std::shared_ptr<const plnet::Network> net() const {
    if (net_path.empty()) return nullptr;
    return std::make_shared<const plnet::Network>(plnet::load(net_path));
  }
};

void add_common(CLI::App* cmd, Common& c, bool screening = true) {
  cmd->add_option("--seed", c.seed, "random seed");
  if (!screening) return;
  cmd->add_option("--alpha", c.alpha, "significance level");
  cmd->add_option("--k", c.k, "number of neighbors")->check(CLI::PositiveNumber);
  cmd->add_option("--k-candidates", c.k_candidates, "candidate k values for the data-driven choice")
      ->delimiter(',');
  cmd->add_option("--theta-quantile", c.theta_quantile, "quantile of leave-one-out scores used as threshold");
  cmd->add_option("--methods", c.methods, "comma list of stat,wopp,naive,bonferroni,opa1,opa2 or all");
  cmd->add_option("--metric", c.metric, "neighbor metric (squared-l2)");
  cmd->add_option("--statistic", c.statistic, "test statistic: l1 or image-mean");
  cmd->add_option("--net", c.net_path, "piecewise-linear network JSON; neighbors are found in its latent space");
  cmd->add_option("--out-dir", c.out_dir, "directory for result files");
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::Data, "cannot write " + path.string());
  out << text;
}

fs::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), ErrorKind::Data, "cannot create output directory " + dir);
  return dir;
}

json interval_json(const IntervalUnion& z) {
  json out = json::array();
  for (const Interval& iv : z.intervals()) out.push_back({num(iv.lo), num(iv.hi)});
  return out;
}

// ---- detect ----

struct DetectArgs {
  std::string train, test, sigma;
  std::vector<std::string> columns;
  std::optional<double> theta;
};

json detect(const Common& c, const DetectArgs& a) {
  c.check();
  const auto net = c.net();
  harness::IngestedCsv train = harness::ingest_csv(a.train, a.columns, a.sigma.empty() ? std::nullopt
                                                                                     : std::optional<fs::path>(a.sigma));
  require(fs::exists(a.test), ErrorKind::Data, "file not found: " + a.test);
  const Matrix test_raw = io::numeric_columns(io::read_csv(a.test), train.columns);
  const Matrix test = train.standardizer.apply(test_raw);
  if (net) require(net->input_dim() == train.dataset.d(), ErrorKind::Config, "network input dimension does not match data");

  ScreeningConfig config{c.ks(), 0.0, Metric::SquaredL2};
  config.validate(train.dataset.n());
  double theta = 0.0;
  if (a.theta) {
    theta = *a.theta;
  } else {
    config.validate(train.dataset.n() - 1);
    theta = harness::calibrate_theta(train.dataset.train, config, c.theta_quantile, net.get());
  }
  config.theta = theta;

  InferenceOptions options;
  options.kind = c.kind();
  options.net = net.get();
  options.methods = MethodSet::parse(c.methods);
  options.methods.stat = true;  // the verdict needs it

  json instances = json::array();
  for (Index r = 0; r < test.rows(); ++r) {
    const Analysis an = analyze(test.row(r).transpose(), train.dataset.train, train.dataset.sigma, config, options);
    const ScreeningResult& s = an.screening;
    json item{{"index", r},
              {"score", num(s.score)},
              {"selected", s.selected},
              {"k_star", s.outcome.k_star},
              {"neighbors", s.outcome.neighbors}};
    if (!an.report) {
      item["verdict"] = "not-a-candidate";
    } else {
      const PValueReport& rep = *an.report;
      item["verdict"] = *rep.p_selective <= c.alpha ? "anomaly" : "normal";
      json p = json::object();
      if (rep.p_selective) p["stat"] = opt(rep.p_selective);
      if (rep.p_wopp) p["wopp"] = opt(rep.p_wopp);
      if (rep.p_naive) p["naive"] = opt(rep.p_naive);
      if (rep.p_bonferroni) p["bonferroni"] = opt(rep.p_bonferroni);
      if (rep.p_opa1) p["opa1"] = opt(rep.p_opa1);
      if (rep.p_opa2) p["opa2"] = opt(rep.p_opa2);
      item["p_values"] = p;
      item["z_obs"] = rep.z_obs;
      item["sigma2"] = rep.sigma2;
      item["eta_flipped"] = rep.eta_flipped;
      item["truncation"] = interval_json(rep.truncation);
      json counts = json::object();
      for (const auto& [tag, count] : rep.n_inequalities) counts[to_string(tag)] = count;
      item["n_inequalities"] = counts;
    }
    instances.push_back(std::move(item));
  }

  json report{{"command", "detect"},
              {"config",
               {{"alpha", c.alpha},
                {"k", c.ks()},
                {"theta", theta},
                {"theta_quantile", a.theta ? json(nullptr) : json(c.theta_quantile)},
                {"metric", c.metric},
                {"statistic", c.statistic},
                {"methods", options.methods.str()},
                {"latent", static_cast<bool>(net)},
                {"columns", train.columns},
                {"n", train.dataset.n()},
                {"d", train.dataset.d()}}},
              {"instances", instances}};
  if (!c.out_dir.empty()) write_file(prepare_out_dir(c.out_dir) / "report.json", report.dump(2) + '\n');
  return report;
}

// ---- experiment ----

struct ExperimentArgs {
  std::string mode = "null";
  std::string pipeline = "synthetic";
  std::string sweep;
  std::vector<double> values;
  Index n = 100;
  Index d = 2;
  double delta = 0.0;
  std::size_t trials = 1000;
  std::size_t target_screened = 0;
  std::string data;
  std::vector<std::string> columns;
  Index patch = 4;
  Index image_size = 16;
  bool serial = false;
};

Index as_index(double v, const std::string& what) {
  require(v >= 1 && std::floor(v) == v, ErrorKind::Config, what + " sweep values must be positive integers");
  return static_cast<Index>(v);
}

json experiment(const Common& c, const ExperimentArgs& a) {
  c.check();
  require(!c.out_dir.empty(), ErrorKind::Config, "experiment needs --out-dir");
  require(a.mode == "null" || a.mode == "power", ErrorKind::Config, "mode must be null or power");
  require(a.pipeline == "synthetic" || a.pipeline == "tabular" || a.pipeline == "image", ErrorKind::Config,
          "pipeline must be synthetic, tabular or image");
  require(a.sweep.empty() || a.sweep == "n" || a.sweep == "d" || a.sweep == "k" || a.sweep == "delta",
          ErrorKind::Config, "sweep must be one of n, d, k, delta");
  require(a.sweep.empty() == a.values.empty(), ErrorKind::Config, "--sweep and --values go together");
  require(!(a.mode == "null" && a.sweep == "delta"), ErrorKind::Config, "a delta sweep needs --mode power");
  require(!(a.pipeline != "synthetic" && a.sweep == "d"), ErrorKind::Config, "d is fixed by the data for this pipeline");

  harness::SyntheticSpec base;
  base.n = a.n;
  base.d = a.d;
  base.ks = c.ks();
  base.delta = a.mode == "null" ? 0.0 : a.delta;
  base.trials = a.trials;
  base.target_screened = a.target_screened;
  base.seed = c.seed;
  base.theta_quantile = c.theta_quantile;
  base.alpha = c.alpha;
  base.kind = c.kind();
  base.methods = MethodSet::parse(c.methods);
  base.net = c.net();

  std::optional<harness::IngestedCsv> table;
  if (a.pipeline == "tabular") {
    require(!a.data.empty(), ErrorKind::Config, "the tabular pipeline needs --data");
    table = harness::ingest_csv(a.data, a.columns);
  }

  const auto exec = a.serial ? kernels::Execution::Serial : kernels::Execution::Parallel;
  auto run = [&](const harness::SyntheticSpec& spec) {
    if (a.pipeline == "tabular") return harness::run_tabular(spec, table->dataset.train, exec);
    if (a.pipeline == "image") {
      harness::ImageSpec im;
      im.base = spec;
      im.patch = a.patch;
      im.height = a.image_size;
      im.width = a.image_size;
      im.row = (a.image_size - a.patch) / 2;
      im.col = (a.image_size - a.patch) / 2;
      return harness::run_image(im, exec);
    }
    return spec.delta > 0.0 ? harness::run_power(spec, exec) : harness::run_null(spec, exec);
  };

  std::vector<double> xs = a.values;
  if (xs.empty()) xs.push_back(a.mode == "power" ? a.delta : 0.0);
  require(a.mode == "null" || a.sweep == "delta" || a.delta > 0.0, ErrorKind::Config, "power mode needs --delta > 0");

  std::vector<harness::SweepRow> rows;
  json runs = json::array();
  for (double x : xs) {
    harness::SyntheticSpec spec = base;
    if (a.sweep == "n") spec.n = as_index(x, "n");
    if (a.sweep == "d") spec.d = as_index(x, "d");
    if (a.sweep == "k") spec.ks = {as_index(x, "k")};
    if (a.sweep == "delta") {
      require(x > 0.0, ErrorKind::Config, "delta sweep values must be positive");
      spec.delta = x;
    }
    if (a.pipeline == "image") spec.d = a.patch * a.patch;
    if (a.pipeline == "tabular") spec.d = table->dataset.d();
    harness::ExperimentResult res = run(spec);
    json j = harness::to_json(res);
    j["x"] = x;
    j["spec"] = harness::to_json(spec);
    runs.push_back(std::move(j));
    rows.push_back({x, std::move(res)});
  }

  const fs::path dir = prepare_out_dir(c.out_dir);
  const std::string x_name = a.sweep.empty() ? (a.mode == "power" ? "delta" : "x") : a.sweep;
  harness::write_plot_csv(dir / "plot.csv", x_name, rows);
  harness::write_trials_csv(dir / "trials.csv", rows);
  json report{{"command", "experiment"},
              {"mode", a.mode},
              {"pipeline", a.pipeline},
              {"sweep", a.sweep.empty() ? json(nullptr) : json(a.sweep)},
              {"seed", c.seed},
              {"alpha", c.alpha},
              {"runs", runs},
              {"files", {{"results", (dir / "results.json").string()},
                         {"plot", (dir / "plot.csv").string()},
                         {"trials", (dir / "trials.csv").string()}}}};
  write_file(dir / "results.json", report.dump(2) + '\n');
  return report;
}

// ---- theta ----

json theta(const Common& c, const std::string& train_path, const std::vector<std::string>& columns) {
  c.check();
  const auto net = c.net();
  const harness::IngestedCsv train = harness::ingest_csv(train_path, columns);
  if (net) require(net->input_dim() == train.dataset.d(), ErrorKind::Config, "network input dimension does not match data");
  const ScreeningConfig config{c.ks(), 0.0, Metric::SquaredL2};
  config.validate(train.dataset.n() - 1);
  const double th = harness::calibrate_theta(train.dataset.train, config, c.theta_quantile, net.get());
  return {{"command", "theta"},
          {"theta", th},
          {"quantile", c.theta_quantile},
          {"k", c.ks()},
          {"n", train.dataset.n()},
          {"d", train.dataset.d()},
          {"latent", static_cast<bool>(net)}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"k-NN anomaly detection with selective p-values"};
  app.set_config("--config", "", "TOML-style configuration file; command-line flags take precedence");
  app.require_subcommand(1);

  Common common;

  DetectArgs det;
  auto* cmd_detect = app.add_subcommand("detect", "screen test instances and report selective p-values");
  add_common(cmd_detect, common);
  cmd_detect->add_option("--train", det.train, "training CSV (header row)")->required();
  cmd_detect->add_option("--test", det.test, "test CSV with the same columns")->required();
  cmd_detect->add_option("--sigma", det.sigma, "noise covariance CSV (d x d, no header); identity by default");
  cmd_detect->add_option("--columns", det.columns, "feature columns (default: all)")->delimiter(',');
  cmd_detect->add_option("--theta", det.theta, "fixed threshold; otherwise calibrated from --theta-quantile");

  ExperimentArgs exp;
  auto* cmd_exp = app.add_subcommand("experiment", "simulate type-I error or power over a parameter sweep");
  add_common(cmd_exp, common);
  cmd_exp->add_option("--mode", exp.mode, "null or power");
  cmd_exp->add_option("--pipeline", exp.pipeline, "synthetic, tabular or image");
  cmd_exp->add_option("--sweep", exp.sweep, "swept parameter: n, d, k or delta");
  cmd_exp->add_option("--values", exp.values, "sweep values")->delimiter(',');
  cmd_exp->add_option("--n", exp.n, "training set size");
  cmd_exp->add_option("--d", exp.d, "dimension (synthetic pipeline)");
  cmd_exp->add_option("--delta", exp.delta, "signal strength in power mode");
  cmd_exp->add_option("--trials", exp.trials, "trials to run (the cap when --target-screened is set)");
  cmd_exp->add_option("--target-screened", exp.target_screened, "stop once this many trials passed the screen");
  cmd_exp->add_option("--data", exp.data, "CSV table for the tabular pipeline");
  cmd_exp->add_option("--columns", exp.columns, "feature columns of --data (default: all)")->delimiter(',');
  cmd_exp->add_option("--patch", exp.patch, "patch side length for the image pipeline");
  cmd_exp->add_option("--image-size", exp.image_size, "side length of synthetic images");
  cmd_exp->add_flag("--serial", exp.serial, "run trials on one thread");

  std::string theta_train;
  std::vector<std::string> theta_columns;
  auto* cmd_theta = app.add_subcommand("theta", "calibrate the screening threshold on training data");
  add_common(cmd_theta, common);
  cmd_theta->add_option("--train", theta_train, "training CSV")->required();
  cmd_theta->add_option("--columns", theta_columns, "feature columns (default: all)")->delimiter(',');

  plnet::RandomNetSpec net_spec;
  std::string net_out;
  auto* cmd_net = app.add_subcommand("net-gen", "write a random piecewise-linear network as JSON");
  add_common(cmd_net, common, false);
  cmd_net->add_option("--input-dim", net_spec.input_dim, "input width")->required()->check(CLI::PositiveNumber);
  cmd_net->add_option("--hidden", net_spec.hidden, "hidden widths")->delimiter(',');
  cmd_net->add_option("--latent-dim", net_spec.latent_dim, "output width")->check(CLI::PositiveNumber);
  cmd_net->add_option("--pool-window", net_spec.pool_window, "trailing max-pool window (0: none)");
  cmd_net->add_option("--out", net_out, "output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("config", e.what());
    return 2;
  }

  try {
    json out;
    if (*cmd_detect) out = detect(common, det);
    else if (*cmd_exp) out = experiment(common, exp);
    else if (*cmd_theta) out = theta(common, theta_train, theta_columns);
    else {
      net_spec.seed = common.seed;
      const plnet::Network net = plnet::random_network(net_spec);
      out = plnet::to_json(net);
      if (!net_out.empty()) {
        plnet::save(net, net_out);
        out = {{"command", "net-gen"}, {"path", net_out}, {"input_dim", net.input_dim()}, {"output_dim", net.output_dim()}};
      }
    }
    std::cout << out.dump(2) << '\n';
    return 0;
  } catch (const Error& e) {
    print_error(to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    print_error("numerical", e.what());
    return 4;
  }
}
