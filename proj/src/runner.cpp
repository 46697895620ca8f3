#include "modsindy/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "modsindy/regression.hpp"

namespace modsindy {

using nlohmann::json;

RunMode run_mode_from_string(const std::string& name) {
  if (name == "fit") return RunMode::Fit;
  if (name == "discrepancy") return RunMode::Discrepancy;
  if (name == "iterative-mean") return RunMode::IterativeMean;
  if (name == "baseline") return RunMode::BaselineSindy;
  throw ConfigError("unknown run mode '" + name + "'", "mode");
}

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::Fit: return "fit";
    case RunMode::Discrepancy: return "discrepancy";
    case RunMode::IterativeMean: return "iterative-mean";
    case RunMode::BaselineSindy: return "baseline";
  }
  return "fit";
}

SweepAxis sweep_axis_from_string(const std::string& name) {
  if (name == "noise_level") return SweepAxis::NoiseLevel;
  if (name == "data_length") return SweepAxis::DataLength;
  if (name == "lambda") return SweepAxis::Lambda;
  if (name == "q") return SweepAxis::Q;
  if (name == "n_loop") return SweepAxis::NLoop;
  throw ConfigError("unknown sweep axis '" + name + "'", "axis");
}

namespace {

double require_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError("expected a number at '" + path + "'", path);
  return j.get<double>();
}

int require_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError("expected an integer at '" + path + "'", path);
  return j.get<int>();
}

std::string require_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError("expected a string at '" + path + "'", path);
  return j.get<std::string>();
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what(), "");
  }
  if (!j.is_object()) throw ConfigError("top level must be an object", "");

  ExperimentConfig cfg;
  if (!j.contains("system")) throw ConfigError("missing required field 'system'", "system");
  cfg.system = require_string(j.at("system"), "system");
  catalog_system(cfg.system);  // validates the name

  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const json& v = it.value();
    if (key == "system") {
      continue;
    } else if (key == "name") {
      cfg.name = require_string(v, key);
    } else if (key == "x0") {
      if (!v.is_array() || v.empty()) throw ConfigError("'x0' must be a non-empty array", key);
      Vector x0(v.size());
      for (size_t i = 0; i < v.size(); ++i)
        x0[static_cast<long>(i)] = require_number(v[i], key + "[" + std::to_string(i) + "]");
      cfg.x0 = x0;
    } else if (key == "dt") {
      cfg.dt = require_number(v, key);
      if (*cfg.dt <= 0.0) throw ConfigError("'dt' must be positive", key);
    } else if (key == "T") {
      cfg.T = require_number(v, key);
      if (*cfg.T <= 0.0) throw ConfigError("'T' must be positive", key);
    } else if (key == "library_order") {
      cfg.library_order = require_int(v, key);
      if (*cfg.library_order < 1) throw ConfigError("'library_order' must be >= 1", key);
    } else if (key == "include_constant") {
      if (!v.is_boolean()) throw ConfigError("expected a boolean at 'include_constant'", key);
      cfg.include_constant = v.get<bool>();
    } else if (key == "noise") {
      if (!v.is_object()) throw ConfigError("'noise' must be an object", key);
      for (auto nit = v.begin(); nit != v.end(); ++nit) {
        const std::string p = key + "." + nit.key();
        if (nit.key() == "kind")
          cfg.noise.kind = noise_kind_from_string(require_string(nit.value(), p));
        else if (nit.key() == "level_percent")
          cfg.noise.level_percent = require_number(nit.value(), p);
        else if (nit.key() == "seed")
          cfg.noise.seed = static_cast<unsigned long>(require_int(nit.value(), p));
        else
          throw ConfigError("unknown field '" + p + "'", p);
      }
      if (cfg.noise.level_percent < 0.0)
        throw ConfigError("'noise.level_percent' must be >= 0", key + ".level_percent");
    } else if (key == "fit") {
      if (!v.is_object()) throw ConfigError("'fit' must be an object", key);
      for (auto fit = v.begin(); fit != v.end(); ++fit) {
        const std::string p = key + "." + fit.key();
        if (fit.key() == "q") cfg.fit.q = require_int(fit.value(), p);
        else if (fit.key() == "lambda") cfg.fit.lambda = require_number(fit.value(), p);
        else if (fit.key() == "c") cfg.fit.c = require_number(fit.value(), p);
        else if (fit.key() == "n_loop") cfg.fit.n_loop = require_int(fit.value(), p);
        else if (fit.key() == "lr") cfg.fit.lr = require_number(fit.value(), p);
        else if (fit.key() == "max_iter") cfg.fit.max_iter = require_int(fit.value(), p);
        else if (fit.key() == "soft_start") {
          if (!fit.value().is_boolean()) throw ConfigError("expected a boolean at '" + p + "'", p);
          cfg.fit.soft_start = fit.value().get<bool>();
        } else if (fit.key() == "smoothing_gamma")
          cfg.fit.smoothing_gamma = require_number(fit.value(), p);
        else
          throw ConfigError("unknown field '" + p + "'", p);
      }
      cfg.fit.validate();
    } else if (key == "repeats") {
      cfg.repeats = require_int(v, key);
      if (cfg.repeats < 1) throw ConfigError("'repeats' must be >= 1", key);
    } else if (key == "mode") {
      cfg.mode = run_mode_from_string(require_string(v, key));
    } else if (key == "n_outer") {
      cfg.n_outer = require_int(v, key);
      if (cfg.n_outer < 1) throw ConfigError("'n_outer' must be >= 1", key);
    } else if (key == "prior_system") {
      cfg.prior_system = require_string(v, key);
      catalog_system(cfg.prior_system);
    } else if (key == "prediction_T") {
      cfg.prediction_T = require_number(v, key);
    } else {
      throw ConfigError("unknown field '" + key + "'", key);
    }
  }
  if (cfg.mode == RunMode::Discrepancy && cfg.prior_system.empty())
    throw ConfigError("mode 'discrepancy' requires 'prior_system'", "prior_system");
  return cfg;
}

std::string ExperimentConfig::to_json_text() const {
  json j;
  j["system"] = system;
  if (!name.empty()) j["name"] = name;
  if (x0) {
    json arr = json::array();
    for (long i = 0; i < x0->size(); ++i) arr.push_back((*x0)[i]);
    j["x0"] = arr;
  }
  if (dt) j["dt"] = *dt;
  if (T) j["T"] = *T;
  if (library_order) j["library_order"] = *library_order;
  if (include_constant) j["include_constant"] = *include_constant;
  j["noise"] = {{"kind", to_string(noise.kind)},
                {"level_percent", noise.level_percent},
                {"seed", noise.seed}};
  j["fit"] = {{"q", fit.q},          {"lambda", fit.lambda},
              {"c", fit.c},          {"n_loop", fit.n_loop},
              {"lr", fit.lr},        {"max_iter", fit.max_iter},
              {"soft_start", fit.soft_start}, {"smoothing_gamma", fit.smoothing_gamma}};
  j["repeats"] = repeats;
  j["mode"] = to_string(mode);
  if (mode == RunMode::IterativeMean) j["n_outer"] = n_outer;
  if (!prior_system.empty()) j["prior_system"] = prior_system;
  j["prediction_T"] = prediction_T;
  return j.dump(2);
}

const SystemSpec& ExperimentConfig::resolved_system() const { return catalog_system(system); }

Vector ExperimentConfig::resolved_x0() const {
  return x0 ? *x0 : resolved_system().default_x0;
}
double ExperimentConfig::resolved_dt() const { return dt ? *dt : resolved_system().default_dt; }
double ExperimentConfig::resolved_T() const { return T ? *T : resolved_system().default_T; }

CandidateLibrary ExperimentConfig::resolved_library() const {
  const SystemSpec& sys = resolved_system();
  int order = library_order ? *library_order : sys.default_library_order;
  bool constant = include_constant ? *include_constant : sys.default_include_constant;
  return build_polynomial_library(sys.dim, order, constant);
}

std::filesystem::path default_output_root() {
  if (const char* env = std::getenv("MODSINDY_OUT_ROOT")) return env;
  return "runs";
}

PreparedData prepare_data(const ExperimentConfig& config, int seed_offset) {
  PreparedData data;
  data.clean = simulate(config.resolved_system(), config.resolved_x0(), config.resolved_dt(),
                        config.resolved_T());
  NoiseSpec spec = config.noise;
  spec.seed = config.noise.seed + static_cast<unsigned long>(seed_offset);
  if (spec.level_percent > 0.0) {
    data.noise = generate_noise(spec, data.clean);
  } else {
    data.noise = Matrix::Zero(data.clean.samples(), data.clean.dim());
  }
  data.noisy = data.clean;
  data.noisy.states += data.noise;
  return data;
}

MetricsReport score_fit(const ExperimentConfig& config, const PreparedData& data,
                        const FitResult& fit, const CandidateLibrary& lib, double runtime_s) {
  const SystemSpec& sys = config.resolved_system();
  MetricsReport report;
  report.runtime_s = runtime_s;
  report.e_f = vector_field_error(
      [&sys](const Vector& x) { return sys.rhs(x); },
      [&lib, &fit](const Vector& x) { return model_rhs(lib, fit.xi, x); }, data.clean.states);
  report.e_n = noise_error(data.noise, fit.nhat);

  const CoefficientMatrix xi_true = true_coefficients(sys, lib);
  report.e_p = parameter_error(xi_true.values, fit.xi.values);
  report.structure_correct = support_equal(xi_true.active, fit.xi.active);

  long horizon = -1;
  if (config.prediction_T > 0.0)
    horizon = std::min<long>(data.clean.samples() - 1,
                             std::lround(config.prediction_T / data.clean.dt));
  PredictionError pe = prediction_error(data.clean.states, lib, fit.xi, data.clean.dt, horizon);
  report.e_F = pe.value;
  report.prediction_unstable = pe.unstable;
  report.unstable_step = pe.failed_step;
  return report;
}

namespace {

// Classical SINDy on pre-smoothed data with finite-difference derivatives.
FitResult baseline_fit(const TimeSeries& noisy, const CandidateLibrary& lib,
                       const FitConfig& config) {
  Matrix smoothed = smooth(noisy.states, config.smoothing_gamma);
  Matrix theta = evaluate_library(lib, smoothed);
  Matrix xdot = fd_derivative(smoothed, noisy.dt);
  StlsqResult res = stlsq(theta, xdot, config.lambda);
  FitResult out;
  out.xi = res.xi;
  out.nhat = noisy.states - smoothed;
  out.denoised = smoothed;
  out.warnings = res.warnings;
  return out;
}

SeedOutcome run_one(const ExperimentConfig& config, int seed_index) {
  SeedOutcome outcome;
  outcome.seed_index = seed_index;
  const auto start = std::chrono::steady_clock::now();
  try {
    PreparedData data = prepare_data(config, seed_index);
    CandidateLibrary lib = config.resolved_library();
    switch (config.mode) {
      case RunMode::Fit:
        outcome.fit = fit(data.noisy, lib, config.fit);
        break;
      case RunMode::Discrepancy:
        outcome.fit =
            fit_discrepancy(data.noisy, catalog_system(config.prior_system), lib, config.fit);
        break;
      case RunMode::IterativeMean:
        outcome.fit = fit_iterative_mean(data.noisy, lib, config.fit, config.n_outer);
        break;
      case RunMode::BaselineSindy:
        outcome.fit = baseline_fit(data.noisy, lib, config.fit);
        break;
    }
    const double runtime =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    outcome.metrics = score_fit(config, data, outcome.fit, lib, runtime);
  } catch (const Error& e) {
    outcome.failed = true;
    outcome.error = e.what();
  }
  return outcome;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

}  // namespace

RunOutput run_in_memory(const ExperimentConfig& config) {
  RunOutput output;
  int ok = 0;
  for (int i = 0; i < config.repeats; ++i) {
    output.outcomes.push_back(run_one(config, i));
    const SeedOutcome& o = output.outcomes.back();
    if (!o.failed && o.metrics.structure_correct) ++ok;
  }
  output.success_rate = static_cast<double>(ok) / static_cast<double>(config.repeats);
  return output;
}

namespace {

std::string timestamp_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y%m%d-%H%M%S");
  return out.str();
}

json fit_to_json(const FitResult& fit, const CandidateLibrary& lib) {
  auto coeff_json = [&lib](const CoefficientMatrix& xi) {
    json terms = json::array();
    for (int i = 0; i < xi.values.rows(); ++i)
      for (int k = 0; k < xi.values.cols(); ++k)
        if (xi.active(i, k))
          terms.push_back({{"state", k + 1},
                           {"term", lib.term_name(i)},
                           {"coefficient", xi.values(i, k)}});
    return terms;
  };
  json j;
  j["model"] = format_model(lib, fit.xi);
  j["coefficients"] = coeff_json(fit.xi);
  j["active_terms"] = fit.xi.active_count();
  if (!fit.loss_history.empty()) j["final_loss"] = fit.loss_history.back();
  j["warnings"] = fit.warnings;
  if (fit.discrepancy) {
    j["discrepancy_model"] = format_model(lib, *fit.discrepancy);
    j["discrepancy_coefficients"] = coeff_json(*fit.discrepancy);
  }
  if (fit.mean_iteration_unconverged) j["mean_iteration_unconverged"] = true;
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw Error("failed to write " + path.string());
}

}  // namespace

RunOutput run(const ExperimentConfig& config, const std::filesystem::path& out_root) {
  const std::string stem = config.name.empty() ? config.system : config.name;
  std::filesystem::path dir = out_root / (stem + "_" + timestamp_now());
  for (int suffix = 1; std::filesystem::exists(dir); ++suffix)
    dir = out_root / (stem + "_" + timestamp_now() + "_" + std::to_string(suffix));
  std::filesystem::create_directories(dir);

  write_text(dir / "config.json", config.to_json_text() + "\n");

  RunOutput output = run_in_memory(config);
  output.directory = dir;

  CandidateLibrary lib = config.resolved_library();
  PreparedData first = prepare_data(config, 0);
  write_timeseries_csv(first.clean, (dir / "clean.csv").string());

  std::ostringstream metrics_csv;
  metrics_csv << "seed," << MetricsReport::csv_header() << ",failed\n";
  for (const SeedOutcome& o : output.outcomes) {
    metrics_csv << o.seed_index << "," << o.metrics.to_csv_row() << "," << (o.failed ? 1 : 0)
                << "\n";
    const std::string tag = std::to_string(o.seed_index);
    if (o.failed) {
      write_text(dir / ("error_" + tag + ".txt"), o.error + "\n");
      continue;
    }
    PreparedData data = prepare_data(config, o.seed_index);
    write_timeseries_csv(data.noisy, (dir / ("noisy_" + tag + ".csv")).string());
    TimeSeries denoised{data.noisy.t0, data.noisy.dt, o.fit.denoised};
    write_timeseries_csv(denoised, (dir / ("denoised_" + tag + ".csv")).string());
    TimeSeries nhat{data.noisy.t0, data.noisy.dt, o.fit.nhat};
    write_timeseries_csv(nhat, (dir / ("nhat_" + tag + ".csv")).string());
    write_text(dir / ("model_" + tag + ".txt"), format_model(lib, o.fit.xi) + "\n");
    write_text(dir / ("fit_" + tag + ".json"), fit_to_json(o.fit, lib).dump(2) + "\n");
    write_text(dir / ("metrics_" + tag + ".json"), o.metrics.to_json() + "\n");

    auto summaries = summarize_noise(o.fit.nhat);
    for (size_t k = 0; k < summaries.size(); ++k)
      write_histogram_csv(summaries[k], (dir / ("noise_hist_" + tag + "_x" +
                                                std::to_string(k + 1) + ".csv"))
                                            .string());
  }
  write_text(dir / "metrics.csv", metrics_csv.str());

  json summary;
  summary["success_rate"] = output.success_rate;
  json medians;
  std::vector<double> eps, ens, efs;
  for (const SeedOutcome& o : output.outcomes)
    if (!o.failed) {
      eps.push_back(o.metrics.e_p);
      ens.push_back(o.metrics.e_n);
      efs.push_back(o.metrics.e_f);
    }
  medians["e_p"] = median_of(eps);
  medians["e_n"] = median_of(ens);
  medians["e_f"] = median_of(efs);
  summary["median"] = medians;
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  return output;
}

std::vector<SweepPoint> sweep(const ExperimentConfig& config, SweepAxis axis,
                              const std::vector<double>& values,
                              const std::filesystem::path& out_csv) {
  std::vector<SweepPoint> points;
  for (double value : values) {
    ExperimentConfig cfg = config;
    switch (axis) {
      case SweepAxis::NoiseLevel: cfg.noise.level_percent = value; break;
      case SweepAxis::DataLength: cfg.T = value; break;
      case SweepAxis::Lambda: cfg.fit.lambda = value; break;
      case SweepAxis::Q: cfg.fit.q = static_cast<int>(std::lround(value)); break;
      case SweepAxis::NLoop: cfg.fit.n_loop = static_cast<int>(std::lround(value)); break;
    }
    const auto start = std::chrono::steady_clock::now();
    RunOutput out = run_in_memory(cfg);
    SweepPoint point;
    point.value = value;
    point.success_rate = out.success_rate;
    point.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::vector<double> eps, ens, efs;
    for (const SeedOutcome& o : out.outcomes)
      if (!o.failed) {
        eps.push_back(o.metrics.e_p);
        ens.push_back(o.metrics.e_n);
        efs.push_back(o.metrics.e_f);
      }
    point.median_e_p = median_of(eps);
    point.median_e_n = median_of(ens);
    point.median_e_f = median_of(efs);
    point.outcomes = std::move(out.outcomes);
    points.push_back(std::move(point));
  }
  if (!out_csv.empty()) {
    std::ostringstream csv;
    csv << "value,success_rate,median_e_p,median_e_n,median_e_f,wall_time_s\n";
    csv << std::setprecision(17);
    for (const SweepPoint& p : points)
      csv << p.value << "," << p.success_rate << "," << p.median_e_p << "," << p.median_e_n
          << "," << p.median_e_f << "," << p.wall_time_s << "\n";
    write_text(out_csv, csv.str());
  }
  return points;
}

namespace {

std::vector<double> lambda_grid(const CoefficientMatrix& xi_true) {
  double min_coeff = std::numeric_limits<double>::infinity();
  for (int i = 0; i < xi_true.values.rows(); ++i)
    for (int k = 0; k < xi_true.values.cols(); ++k)
      if (xi_true.active(i, k)) min_coeff = std::min(min_coeff, std::abs(xi_true.values(i, k)));
  std::vector<double> grid(100);
  const double lo = 0.01;
  const double hi = min_coeff;
  for (int i = 0; i < 100; ++i) grid[i] = lo + (hi - lo) * static_cast<double>(i) / 99.0;
  return grid;
}

RobustnessResult max_noise_scan(const ExperimentConfig& config, const std::vector<double>& levels,
                                bool use_modified) {
  CandidateLibrary lib = config.resolved_library();
  CoefficientMatrix xi_true = true_coefficients(config.resolved_system(), lib);
  const std::vector<double> grid = lambda_grid(xi_true);

  RobustnessResult result;
  result.levels = levels;
  for (double level : levels) {
    ExperimentConfig cfg = config;
    cfg.noise.level_percent = level;
    bool level_ok = true;
    for (int seed = 0; seed < config.repeats && level_ok; ++seed) {
      bool seed_ok = false;
      if (use_modified) {
        SeedOutcome outcome = run_one(cfg, seed);
        seed_ok = !outcome.failed && outcome.metrics.structure_correct;
      } else {
        PreparedData data = prepare_data(cfg, seed);
        Matrix smoothed = smooth(data.noisy.states, cfg.fit.smoothing_gamma);
        Matrix theta = evaluate_library(lib, smoothed);
        Matrix xdot = fd_derivative(smoothed, data.noisy.dt);
        for (double lambda : grid) {
          StlsqResult res = stlsq(theta, xdot, lambda);
          if (support_equal(res.xi.active, xi_true.active)) {
            seed_ok = true;
            break;
          }
        }
      }
      level_ok = seed_ok;
    }
    result.handled.push_back(level_ok);
  }
  result.max_level = 0.0;
  for (size_t i = 0; i < levels.size(); ++i) {
    if (!result.handled[i]) break;
    result.max_level = levels[i];
  }
  return result;
}

}  // namespace

RobustnessResult baseline_max_noise(const ExperimentConfig& config,
                                    const std::vector<double>& levels) {
  return max_noise_scan(config, levels, /*use_modified=*/false);
}

RobustnessResult modified_max_noise(const ExperimentConfig& config,
                                    const std::vector<double>& levels) {
  return max_noise_scan(config, levels, /*use_modified=*/true);
}

}  // namespace modsindy
