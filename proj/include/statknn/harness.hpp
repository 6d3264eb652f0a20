#pragma once

// Experiment protocol: synthetic / tabular / image-patch trial sources, the
// trial runner (serial reference and OpenMP), rate aggregation and result files.

#include "statknn/inference.hpp"
#include "statknn/io.hpp"
#include "statknn/kernels.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace statknn::harness {

using Rng = std::mt19937_64;

/// Independent generator for substream `stream` of `seed`; trial i always
/// uses stream i, so results do not depend on execution order.
Rng substream(std::uint64_t seed, std::uint64_t stream);

inline constexpr std::uint64_t kCalibrationStream = ~std::uint64_t{0};

struct SyntheticSpec {
  Index n = 100;
  Index d = 2;
  std::vector<Index> ks{1};  // several entries: data-driven k
  double delta = 0.0;        // mean shift of the test instance, N(delta * 1, I)
  std::size_t trials = 1000; // trials to run; the cap when target_screened > 0
  std::size_t target_screened = 0;
  std::uint64_t seed = 0;
  double theta_quantile = 0.95;
  double alpha = 0.05;
  StatisticKind kind = StatisticKind::L1Norm;
  MethodSet methods;
  std::shared_ptr<const plnet::Network> net;  // latent-space kNN when set

  void validate() const;
};

struct MethodStats {
  std::size_t rejections = 0;
  std::size_t screened = 0;
  double rate = 0.0;
  double ci_halfwidth = 0.0;  // 1.96 * binomial standard error
};

struct TrialRecord {
  std::size_t trial = 0;
  bool screened = false;
  double score = 0.0;
  std::optional<double> z_obs;
  std::optional<double> p_selective, p_naive, p_bonferroni, p_wopp, p_opa1, p_opa2;
  std::string error;  // non-empty when the trial failed numerically
};

struct ExperimentResult {
  double theta = 0.0;
  std::size_t trials_run = 0;
  std::size_t screened = 0;
  std::size_t failed = 0;
  bool rates_defined = false;  // false when nothing passed the screen
  std::map<std::string, MethodStats> methods;
  std::vector<TrialRecord> trials;
};

struct TrialData {
  Vector test;
  Matrix train;
};

using TrialSource = std::function<TrialData(Rng&, std::size_t trial)>;

struct RunPlan {
  std::size_t trials = 1000;
  std::size_t target_screened = 0;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  ScreeningConfig config;
  Matrix sigma;
  InferenceOptions options;
};

/// Runs trials in index order (serial) or in batches across threads
/// (parallel); both produce identical results.
ExperimentResult run_trials(const RunPlan& plan, const TrialSource& source,
                            kernels::Execution exec = kernels::Execution::Parallel);

/// theta from the leave-one-out score quantile of a calibration training set,
/// pushed through `net` first when given.
double calibrate_theta(const Matrix& calibration_train, const ScreeningConfig& config, double quantile,
                       const plnet::Network* net);

/// Null experiment: test and training instances all N(0, I_d).
ExperimentResult run_null(const SyntheticSpec& spec, kernels::Execution exec = kernels::Execution::Parallel);

/// Power experiment: test instance N(delta * 1, I_d); requires delta > 0.
ExperimentResult run_power(const SyntheticSpec& spec, kernels::Execution exec = kernels::Execution::Parallel);

/// Real-data protocol on a standardized table: each trial draws n training
/// rows and one distinct test row (shifted by delta) without replacement.
ExperimentResult run_tabular(const SyntheticSpec& spec, const Matrix& data,
                             kernels::Execution exec = kernels::Execution::Parallel);

struct IngestedCsv {
  Dataset dataset;
  io::Standardizer standardizer;
  std::vector<std::string> columns;
};

/// Reads the chosen columns (all when empty), standardizes them and attaches
/// the covariance from `sigma_path` or the identity.
IngestedCsv ingest_csv(const std::filesystem::path& path, const std::vector<std::string>& feature_columns,
                       const std::optional<std::filesystem::path>& sigma_path = std::nullopt);

/// Row-major flattening of the patch x patch block at (row, col).
Vector patchify(const Matrix& image, Index patch, Index row, Index col);

/// Top-left corners of a stride-`stride` tiling that fits inside the image.
std::vector<std::pair<Index, Index>> tile_positions(Index height, Index width, Index patch, Index stride);

struct ImageSpec {
  SyntheticSpec base;  // n, ks, delta, trials, seed, ... ; base.d is ignored
  Index height = 16;
  Index width = 16;
  Index patch = 4;
  Index row = 0;
  Index col = 0;
  double noise_sd = 1.0;
  std::uint64_t texture_seed = 7;
};

/// Smooth synthetic texture shared by every normal image.
Matrix synth_texture(Index height, Index width, std::uint64_t seed);

/// Patch pipeline: normal images are texture + N(0, noise_sd^2) pixel noise,
/// the training set is n patches from the same position, the test patch is
/// taken from a fresh image and shifted by delta.
ExperimentResult run_image(const ImageSpec& spec, kernels::Execution exec = kernels::Execution::Parallel);

// ---- result files ----

nlohmann::json to_json(const ExperimentResult& result);
nlohmann::json to_json(const SyntheticSpec& spec);

struct SweepRow {
  double x = 0.0;
  ExperimentResult result;
};

void write_trials_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);
void write_plot_csv(const std::filesystem::path& path, const std::string& x_name, const std::vector<SweepRow>& rows);

}  // namespace statknn::harness
