#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "modsindy/denoise.hpp"
#include "modsindy/metrics.hpp"
#include "modsindy/noise.hpp"

namespace modsindy {

enum class RunMode { Fit, Discrepancy, IterativeMean, BaselineSindy };

RunMode run_mode_from_string(const std::string& name);
std::string to_string(RunMode mode);

// One experiment: simulate a catalog system, corrupt it, fit, and score.
// Unset simulation/library fields fall back to the system's defaults.
struct ExperimentConfig {
  std::string system;
  std::optional<Vector> x0;
  std::optional<double> dt;
  std::optional<double> T;
  NoiseSpec noise;
  std::optional<int> library_order;
  std::optional<bool> include_constant;
  FitConfig fit;
  int repeats = 1;
  RunMode mode = RunMode::Fit;
  int n_outer = 3;                   // iterative-mean outer passes
  std::string prior_system;          // discrepancy prior g
  double prediction_T = 6.0;         // forward-simulation horizon for e_F
  std::string name;                  // output directory stem

  static ExperimentConfig from_json_text(const std::string& text);
  std::string to_json_text() const;

  const SystemSpec& resolved_system() const;
  Vector resolved_x0() const;
  double resolved_dt() const;
  double resolved_T() const;
  CandidateLibrary resolved_library() const;
};

struct SeedOutcome {
  int seed_index = 0;
  bool failed = false;
  std::string error;
  MetricsReport metrics;
  FitResult fit;
};

struct RunOutput {
  std::filesystem::path directory;
  std::vector<SeedOutcome> outcomes;
  double success_rate = 0.0;
};

// Default output root: $MODSINDY_OUT_ROOT, else ./runs.
std::filesystem::path default_output_root();

// Execute the experiment for `repeats` seeds (noise seed = base + i), write
// clean/noisy data, per-seed fit results and metrics, and plot-ready CSVs
// under a timestamped directory. Per-seed failures are recorded, not fatal.
RunOutput run(const ExperimentConfig& config, const std::filesystem::path& out_root);

// In-memory variant used by sweeps and tests (no files written).
RunOutput run_in_memory(const ExperimentConfig& config);

enum class SweepAxis { NoiseLevel, DataLength, Lambda, Q, NLoop };
SweepAxis sweep_axis_from_string(const std::string& name);

struct SweepPoint {
  double value = 0.0;
  double success_rate = 0.0;
  double median_e_p = 0.0, median_e_n = 0.0, median_e_f = 0.0;
  double wall_time_s = 0.0;
  std::vector<SeedOutcome> outcomes;
};

// Run `repeats` seeds per axis value; aggregate table written as CSV when
// out_csv is non-empty.
std::vector<SweepPoint> sweep(const ExperimentConfig& config, SweepAxis axis,
                              const std::vector<double>& values,
                              const std::filesystem::path& out_csv = {});

// Classical-SINDy robustness baseline: pre-smooth, finite-difference
// derivatives, STLSQ over a grid of 100 lambdas from 0.01 to the smallest
// true coefficient magnitude. A noise level counts as handled when every
// seed admits a lambda with exactly the true support.
struct RobustnessResult {
  std::vector<double> levels;
  std::vector<bool> handled;
  double max_level = 0.0;  // largest handled level before the first failure
};

RobustnessResult baseline_max_noise(const ExperimentConfig& config,
                                    const std::vector<double>& levels);
// Same protocol for the joint-denoising fit at the config's fit parameters.
RobustnessResult modified_max_noise(const ExperimentConfig& config,
                                    const std::vector<double>& levels);

// Shared helpers.
struct PreparedData {
  TimeSeries clean;
  TimeSeries noisy;
  Matrix noise;
};
PreparedData prepare_data(const ExperimentConfig& config, int seed_offset);

MetricsReport score_fit(const ExperimentConfig& config, const PreparedData& data,
                        const FitResult& fit, const CandidateLibrary& lib, double runtime_s);

}  // namespace modsindy
