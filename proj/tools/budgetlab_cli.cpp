#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "budgetlab/config.hpp"
#include "budgetlab/controllers.hpp"
#include "budgetlab/error.hpp"
#include "budgetlab/forecast.hpp"
#include "budgetlab/harness.hpp"
#include "budgetlab/kernels.hpp"
#include "budgetlab/report.hpp"
#include "budgetlab/response.hpp"

namespace fs = std::filesystem;
using namespace budgetlab;

namespace {

constexpr int kExitConfig = 2;

struct CommonOptions {
  int jobs = 0;
  std::string out;
  bool debug_dumps = false;
  bool plots = false;
  bool quiet = false;
};

// History, identified parameters and the particle cloud of trial 0, for
// offline inspection.
void write_model_dumps(const ExperimentConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  const NoiseStream noise(trial_seed(config.master_seed, 0));
  const HistorySimulation hist = generate_history(config.env, config.regime, noise);
  std::ofstream f(dir / "trial_0_history.csv");
  write_history_csv(hist.data, f);
  f.close();
  const RollingIdentification ident = rolling_identify(hist.data, config.settings.rolling);
  f.open(dir / "trial_0_identified.csv");
  write_identified_csv(ident.thetas, f);
  f.close();

  ControllerContext ctx;
  ctx.history = &hist.data;
  ctx.env = &config.env;
  ctx.regime = config.regime;
  ctx.noise = noise.derive(0x70662d6d7063ULL);
  ctx.settings = config.settings;
  auto ctrl = make_controller(ControllerKind::kMpcParticleFilter, ctx);
  auto* mpc = dynamic_cast<MpcController*>(ctrl.get());
  if (auto* pf = mpc ? dynamic_cast<ParticleFilterSource*>(&mpc->source()) : nullptr) {
    f.open(dir / "trial_0_particles.csv");
    write_particles_csv(pf->particles(), f);
  }
}

ExperimentSummary run_one(const ExperimentConfig& config, const std::string& dir, const CommonOptions& opt) {
  TrialOptions topt;
  topt.debug_dumps = opt.debug_dumps;
  int done = 0;
  auto progress = [&](int) {
    ++done;
    if (!opt.quiet && (done % 20 == 0 || done == config.n_trials)) {
      std::cerr << "\r  " << done << "/" << config.n_trials << " trials" << std::flush;
    }
  };
  const auto trials = run_experiment(config, opt.jobs, topt, progress);
  if (!opt.quiet) std::cerr << "\n";
  const ExperimentSummary summary = summarize(config, trials);
  OutputOptions oo;
  oo.plots = opt.plots;
  oo.debug_dumps = opt.debug_dumps;
  write_experiment_outputs(dir, config, trials, summary, oo);
  if (opt.debug_dumps) write_model_dumps(config, fs::path(dir) / "debug");
  if (summary.n_failed > 0) {
    std::cerr << "warning: " << summary.n_failed << " of " << config.n_trials
              << " trials failed and were excluded (see report.md)\n";
  }
  if (summary.pairing_violations > 0) {
    std::cerr << "warning: " << summary.pairing_violations << " trials failed the pairing audit\n";
  }
  return summary;
}

int cmd_run(const std::string& path, const CommonOptions& opt) {
  ExperimentConfig config = load_config(path);
  const std::string dir = opt.out.empty() ? config.output_dir : opt.out;
  if (!opt.quiet) {
    std::cerr << "running " << config.name << ": " << config.n_trials << " trials, kernels "
              << kernels::isa_name(kernels::active_isa()) << "\n";
  }
  const ExperimentSummary s = run_one(config, dir, opt);
  std::ifstream report(fs::path(dir) / "report.md");
  std::cout << report.rdbuf();
  return s.n_trials > 0 ? 0 : 1;
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw ConfigError("--values", "not a number: '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("--values", "no values given");
  return out;
}

int cmd_sweep(const std::string& path, std::string param, const std::string& values_csv, const CommonOptions& opt) {
  const ExperimentConfig base = load_config(path);
  std::vector<double> values;
  if (!values_csv.empty()) {
    values = parse_values(values_csv);
  } else if (base.sweep) {
    values = base.sweep->values;
  }
  if (param.empty() && base.sweep) param = base.sweep->parameter;
  if (param.empty()) throw ConfigError("--param", "no sweep parameter given");
  const auto& names = sweepable_parameters();
  if (std::find(names.begin(), names.end(), param) == names.end()) {
    throw ConfigError("--param", "unknown parameter '" + param + "'");
  }
  if (values.empty()) throw ConfigError("--values", "no values given");

  const std::string dir = opt.out.empty() ? base.output_dir : opt.out;
  std::vector<SweepRow> rows;
  for (double v : values) {
    ExperimentConfig c = base;
    c.sweep.reset();
    apply_parameter(c, param, v);
    const std::string sub = (fs::path(dir) / (param + "_" + format_number(v))).string();
    if (!opt.quiet) std::cerr << "running " << c.name << " with " << param << " = " << format_number(v) << "\n";
    rows.push_back({v, run_one(c, sub, opt)});
  }
  fs::create_directories(dir);
  std::ofstream f(fs::path(dir) / "sweep.csv", std::ios::binary);
  write_sweep_csv(f, param, rows);
  f.close();
  f.open(fs::path(dir) / "sweep.md", std::ios::binary);
  write_sweep_md(f, base, param, rows);
  f.close();
  std::ifstream md(fs::path(dir) / "sweep.md");
  std::cout << md.rdbuf();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop quarterly budgeting experiments"};
  app.require_subcommand(1);
  CommonOptions opt;
  app.add_option("--jobs,-j", opt.jobs, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--out,-o", opt.out, "Output directory (overrides the config)");
  app.add_flag("--debug-dumps", opt.debug_dumps, "Write traces, solver problems and model dumps");
  app.add_flag("--plots", opt.plots, "Write SVG budget trajectories for the first trials");
  app.add_flag("--quiet,-q", opt.quiet, "No progress output");

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();

  std::string param, values;
  auto* sweep = app.add_subcommand("sweep", "Run one experiment per parameter value");
  sweep->add_option("config", config_path, "Experiment config (JSON)")->required();
  sweep->add_option("--param", param, "Sweepable parameter (defaults to the config's sweep section)");
  sweep->add_option("--values", values, "Comma-separated values");

  run->fallthrough();
  sweep->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, opt);
    return cmd_sweep(config_path, param, values, opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
