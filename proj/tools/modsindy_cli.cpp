// Command-line front end: data generation, corruption, fitting, noise
// distribution identification, baseline comparison, and parameter sweeps.
//
// Exit codes: 0 success, 2 configuration error, 3 fit divergence / runtime
// failure.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "modsindy/runner.hpp"

namespace {

using namespace modsindy;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'", "");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<double> parse_list(const std::string& text, const std::string& field) {
  std::vector<double> values;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    try {
      values.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("cannot parse number '" + item + "'", field);
    }
  }
  if (values.empty()) throw ConfigError("empty value list", field);
  return values;
}

// Shared config-loading flags for fit-like subcommands. CLI flags override
// the corresponding fields of the JSON config.
struct ConfigFlags {
  std::string config_path;
  std::string system;
  double noise_level = -1.0;
  std::string noise_kind;
  long seed = -1;
  int repeats = -1;
  double lambda = -1.0;
  int q = -1;
  int n_loop = -1;
  int max_iter = -1;
  double lr = -1.0;
  double dt = -1.0;
  double T = -1.0;
  int order = -1;

  void attach(CLI::App* app, bool config_required) {
    auto* opt = app->add_option("--config", config_path, "experiment config JSON file");
    if (config_required) opt->required();
    app->add_option("--system", system, "catalog system name");
    app->add_option("--noise-level", noise_level, "noise level in percent");
    app->add_option("--noise-kind", noise_kind,
                    "gaussian | uniform | gamma | rayleigh | dweibull");
    app->add_option("--seed", seed, "base RNG seed");
    app->add_option("--repeats", repeats, "number of seeds");
    app->add_option("--lambda", lambda, "thresholding parameter");
    app->add_option("--q", q, "flow-map prediction steps");
    app->add_option("--n-loop", n_loop, "outer thresholding loops");
    app->add_option("--max-iter", max_iter, "optimizer iterations per loop");
    app->add_option("--lr", lr, "optimizer learning rate");
    app->add_option("--dt", dt, "sample interval");
    app->add_option("--T", T, "trajectory length in time units");
    app->add_option("--order", order, "polynomial library order");
  }

  ExperimentConfig load() const {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
      cfg = ExperimentConfig::from_json_text(read_file(config_path));
    } else if (!system.empty()) {
      cfg.system = system;
      catalog_system(cfg.system);
    } else {
      throw ConfigError("either --config or --system is required", "system");
    }
    if (!system.empty()) cfg.system = system;
    if (noise_level >= 0.0) cfg.noise.level_percent = noise_level;
    if (!noise_kind.empty()) cfg.noise.kind = noise_kind_from_string(noise_kind);
    if (seed >= 0) cfg.noise.seed = static_cast<unsigned long>(seed);
    if (repeats >= 0) cfg.repeats = repeats;
    if (lambda >= 0.0) cfg.fit.lambda = lambda;
    if (q >= 0) cfg.fit.q = q;
    if (n_loop >= 0) cfg.fit.n_loop = n_loop;
    if (max_iter >= 0) cfg.fit.max_iter = max_iter;
    if (lr >= 0.0) cfg.fit.lr = lr;
    if (dt > 0.0) cfg.dt = dt;
    if (T > 0.0) cfg.T = T;
    if (order >= 1) cfg.library_order = order;
    cfg.fit.validate();
    return cfg;
  }
};

int report_run(const RunOutput& out) {
  std::cout << "output directory: " << out.directory.string() << "\n";
  std::cout << "success rate: " << out.success_rate << "\n";
  int failed = 0;
  for (const SeedOutcome& o : out.outcomes) {
    if (o.failed) {
      ++failed;
      std::cerr << "seed " << o.seed_index << " failed: " << o.error << "\n";
    } else {
      std::cout << "seed " << o.seed_index << ": e_p=" << o.metrics.e_p
                << " e_n=" << o.metrics.e_n
                << " structure=" << (o.metrics.structure_correct ? "correct" : "wrong") << "\n";
    }
  }
  return failed == static_cast<int>(out.outcomes.size()) && !out.outcomes.empty() ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint denoising and sparse model identification toolkit"};
  app.require_subcommand(1);

  // --- simulate ---
  auto* sim_cmd = app.add_subcommand("simulate", "integrate a catalog system and write a CSV");
  std::string sim_system, sim_out = "trajectory.csv", sim_x0;
  double sim_dt = -1.0, sim_T = -1.0;
  sim_cmd->add_option("--system", sim_system, "catalog system name")->required();
  sim_cmd->add_option("--out", sim_out, "output CSV path");
  sim_cmd->add_option("--x0", sim_x0, "comma-separated initial state");
  sim_cmd->add_option("--dt", sim_dt, "sample interval");
  sim_cmd->add_option("--T", sim_T, "trajectory length in time units");

  // --- corrupt ---
  auto* cor_cmd = app.add_subcommand("corrupt", "add synthetic noise to a trajectory CSV");
  std::string cor_in, cor_out = "noisy.csv", cor_noise_out, cor_kind = "gaussian";
  double cor_level = 10.0;
  long cor_seed = 0;
  cor_cmd->add_option("--in", cor_in, "clean trajectory CSV")->required();
  cor_cmd->add_option("--out", cor_out, "noisy trajectory CSV");
  cor_cmd->add_option("--noise-out", cor_noise_out, "optional CSV of the noise itself");
  cor_cmd->add_option("--kind", cor_kind, "noise family");
  cor_cmd->add_option("--level", cor_level, "noise level in percent");
  cor_cmd->add_option("--seed", cor_seed, "RNG seed");

  // --- fit / discrepancy ---
  auto* fit_cmd = app.add_subcommand("fit", "joint denoising and model identification");
  ConfigFlags fit_flags;
  std::string fit_out_root;
  fit_flags.attach(fit_cmd, /*config_required=*/false);
  fit_cmd->add_option("--out-root", fit_out_root, "output root directory");

  auto* dis_cmd = app.add_subcommand("discrepancy", "model-discrepancy identification");
  ConfigFlags dis_flags;
  std::string dis_out_root, dis_prior;
  dis_flags.attach(dis_cmd, /*config_required=*/false);
  dis_cmd->add_option("--prior", dis_prior, "catalog name of the known prior model");
  dis_cmd->add_option("--out-root", dis_out_root, "output root directory");

  // --- fit-noise-dist ---
  auto* nd_cmd = app.add_subcommand("fit-noise-dist",
                                    "identify the noise distribution from a noise CSV");
  std::string nd_in, nd_out;
  int nd_state = 0;
  nd_cmd->add_option("--in", nd_in, "noise CSV (t,x1,...,xn)")->required();
  nd_cmd->add_option("--state", nd_state, "1-based state column; 0 = pool all states");
  nd_cmd->add_option("--out", nd_out, "optional JSON output path");

  // --- baseline ---
  auto* base_cmd = app.add_subcommand(
      "baseline", "lambda-grid STLSQ robustness scan, optionally vs the joint fit");
  ConfigFlags base_flags;
  std::string base_levels = "10,20,30,40,50,60,70,80,90,100";
  bool base_modified = false;
  base_flags.attach(base_cmd, /*config_required=*/false);
  base_cmd->add_option("--levels", base_levels, "comma-separated noise levels (percent)");
  base_cmd->add_flag("--modified", base_modified, "also scan the joint-denoising fit");

  // --- sweep ---
  auto* sweep_cmd = app.add_subcommand("sweep", "sweep one parameter axis");
  ConfigFlags sweep_flags;
  std::string sweep_axis, sweep_values, sweep_out = "sweep.csv";
  sweep_flags.attach(sweep_cmd, /*config_required=*/false);
  sweep_cmd->add_option("--axis", sweep_axis,
                        "noise_level | data_length | lambda | q | n_loop")->required();
  sweep_cmd->add_option("--values", sweep_values, "comma-separated axis values")->required();
  sweep_cmd->add_option("--out", sweep_out, "aggregate CSV path");

  // --- metrics ---
  auto* met_cmd = app.add_subcommand("metrics", "run one seed and print its metrics report");
  ConfigFlags met_flags;
  int met_seed_index = 0;
  met_flags.attach(met_cmd, /*config_required=*/false);
  met_cmd->add_option("--seed-index", met_seed_index, "seed offset to evaluate");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim_cmd) {
      const SystemSpec& sys = catalog_system(sim_system);
      Vector x0 = sys.default_x0;
      if (!sim_x0.empty()) {
        std::vector<double> vals = parse_list(sim_x0, "x0");
        if (static_cast<int>(vals.size()) != sys.dim)
          throw ConfigError("x0 must have " + std::to_string(sys.dim) + " entries", "x0");
        x0 = Eigen::Map<Vector>(vals.data(), static_cast<long>(vals.size()));
      }
      TimeSeries ts = simulate(sys, x0, sim_dt > 0 ? sim_dt : sys.default_dt,
                               sim_T > 0 ? sim_T : sys.default_T);
      write_timeseries_csv(ts, sim_out);
      std::cout << "wrote " << ts.samples() << " samples to " << sim_out << "\n";
    } else if (*cor_cmd) {
      TimeSeries ts = read_timeseries_csv(cor_in);
      NoiseSpec spec{noise_kind_from_string(cor_kind), cor_level,
                     static_cast<unsigned long>(cor_seed)};
      Matrix noise = generate_noise(spec, ts);
      TimeSeries noisy = ts;
      noisy.states += noise;
      write_timeseries_csv(noisy, cor_out);
      if (!cor_noise_out.empty())
        write_timeseries_csv(TimeSeries{ts.t0, ts.dt, noise}, cor_noise_out);
      std::cout << "wrote " << cor_out << "\n";
    } else if (*fit_cmd) {
      ExperimentConfig cfg = fit_flags.load();
      std::filesystem::path root =
          fit_out_root.empty() ? default_output_root() : std::filesystem::path(fit_out_root);
      return report_run(run(cfg, root));
    } else if (*dis_cmd) {
      ExperimentConfig cfg = dis_flags.load();
      cfg.mode = RunMode::Discrepancy;
      if (!dis_prior.empty()) cfg.prior_system = dis_prior;
      if (cfg.prior_system.empty())
        throw ConfigError("discrepancy requires --prior or config prior_system", "prior_system");
      catalog_system(cfg.prior_system);
      std::filesystem::path root =
          dis_out_root.empty() ? default_output_root() : std::filesystem::path(dis_out_root);
      return report_run(run(cfg, root));
    } else if (*nd_cmd) {
      TimeSeries ts = read_timeseries_csv(nd_in);
      std::vector<double> samples;
      for (int k = 0; k < ts.dim(); ++k) {
        if (nd_state > 0 && k != nd_state - 1) continue;
        for (long j = 0; j < ts.samples(); ++j) samples.push_back(ts.states(j, k));
      }
      auto fits = fit_distribution(samples);
      std::string text = distribution_fits_to_json(fits);
      if (!nd_out.empty()) {
        std::ofstream out(nd_out);
        out << text << "\n";
      }
      std::cout << text << "\n";
      std::cout << "best family: " << fits.front().family << "\n";
    } else if (*base_cmd) {
      ExperimentConfig cfg = base_flags.load();
      std::vector<double> levels = parse_list(base_levels, "levels");
      RobustnessResult base = baseline_max_noise(cfg, levels);
      std::cout << "level_percent,baseline_handled";
      RobustnessResult mod;
      if (base_modified) {
        mod = modified_max_noise(cfg, levels);
        std::cout << ",modified_handled";
      }
      std::cout << "\n";
      for (size_t i = 0; i < levels.size(); ++i) {
        std::cout << levels[i] << "," << (base.handled[i] ? 1 : 0);
        if (base_modified) std::cout << "," << (mod.handled[i] ? 1 : 0);
        std::cout << "\n";
      }
      std::cout << "baseline max level: " << base.max_level << "\n";
      if (base_modified) std::cout << "modified max level: " << mod.max_level << "\n";
    } else if (*sweep_cmd) {
      ExperimentConfig cfg = sweep_flags.load();
      SweepAxis axis = sweep_axis_from_string(sweep_axis);
      std::vector<double> values = parse_list(sweep_values, "values");
      auto points = sweep(cfg, axis, values, sweep_out);
      std::cout << "value,success_rate,median_e_p\n";
      for (const SweepPoint& p : points)
        std::cout << p.value << "," << p.success_rate << "," << p.median_e_p << "\n";
      std::cout << "wrote " << sweep_out << "\n";
    } else if (*met_cmd) {
      ExperimentConfig cfg = met_flags.load();
      cfg.repeats = 1;
      cfg.noise.seed += static_cast<unsigned long>(met_seed_index);
      RunOutput out = run_in_memory(cfg);
      if (out.outcomes.front().failed) throw Error(out.outcomes.front().error);
      std::cout << out.outcomes.front().metrics.to_json() << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error";
    if (!e.field.empty()) std::cerr << " [" << e.field << "]";
    std::cerr << ": " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
