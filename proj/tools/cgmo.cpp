// Command-line harness: simulation studies, calibration and trajectory replay.
//
// Exit codes: 0 success, 2 invalid configuration or arguments, 3 numerical
// failure, 1 anything else (I/O).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "cgmo/calibration.hpp"
#include "cgmo/config.hpp"
#include "cgmo/scenario_config.hpp"
#include "cgmo/scenarios.hpp"

namespace fs = std::filesystem;
using namespace cgmo;
using namespace cgmo::scenarios;
using cgmo::config::ScenarioConfig;
using cgmo::config::ScenarioKind;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kNumerical = 3;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = 0;  // 0: keep the config value
  std::string replay;
};

ScenarioConfig load(const Options& o, std::optional<ScenarioKind> verb_kind) {
  ScenarioConfig cfg = config::load_scenario(o.config);
  if (verb_kind && cfg.kind && *cfg.kind != *verb_kind)
    throw ConfigError(o.config + ": scenario '" + config::scenario_name(*cfg.kind) +
                      "' does not match this command (expects '" + config::scenario_name(*verb_kind) + "')");
  if (o.seed) cfg.seed = o.seed;
  if (o.jobs > 0) cfg.sweep.jobs = o.jobs;
  return cfg;
}

fs::path out_dir(const Options& o, const ScenarioConfig& cfg, const char* fallback) {
  fs::path p = !o.out.empty() ? fs::path(o.out) : cfg.out.value_or(fs::path("out") / fallback);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + p.string() + ": " + ec.message());
  return p;
}

SegmentModel segment_model(const ScenarioConfig& cfg) { return SegmentModel(config::load_segment(cfg.segment)); }

void print_errors(const char* label, const ForceErrors& e) {
  std::cout << "  " << label << "  rmse_x " << e.rmse_x << " N  rmse_y " << e.rmse_y << " N\n";
}

std::string amp_tag(double a) {
  std::ostringstream os;
  os << a;
  return os.str();
}

int cmd_simulate(const Options& o) {
  const ScenarioConfig cfg = load(o, ScenarioKind::NoiselessOracle);
  const SegmentModel model = segment_model(cfg);
  const auto& s = cfg.simulate;
  const double sc = s.s_c < 0.0 ? model.length() : s.s_c;
  const Wrench w = Wrench::from(s.wrench);
  auto contact = [&](double t) { return ContactInput{Wrench::from(ramp_factor(t, s.ramp) * w.vec()), sc}; };
  auto torque = [&](double t, const SegmentState&) { return Vec2(ramp_factor(t, s.ramp) * s.tau); };
  const Trajectory tr = integrate(model, SegmentState{}, torque, contact, 0.0, s.duration, cfg.integrator);

  EstimatorInputs in = exact_inputs(tr);
  if (s.noise > 0.0)
    in = noisy_inputs(tr, NoiseSpec{s.noise, cfg.require_seed("simulate with noise"), s.noise_kind},
                      s.smoothing_window);
  const EstimationSeries es = run_estimators(model, in, cfg.estimator, tr.w_true);

  const fs::path dir = out_dir(o, cfg, "simulate");
  write_trajectory_csv((dir / "trajectory.csv").string(), tr);
  series_csv(es).write(dir / "series.csv");
  beta_csv(tr, model.length()).write(dir / "beta.csv");
  json rep = estimation_report("noiseless-oracle", cfg.estimator, es);
  if (s.noise > 0.0) rep["noise"] = s.noise;
  write_json(dir / "report.json", rep);

  std::cout << "simulate: " << tr.size() << " samples -> " << dir.string() << "\n";
  print_errors("GMO", force_errors(es.w_true, es.w_gmo));
  print_errors("JFD", force_errors(es.w_true, es.w_jfd));
  return kOk;
}

int cmd_noise_study(const Options& o) {
  ScenarioConfig cfg = load(o, ScenarioKind::NoiseStudy);
  cfg.noise_study.seed = cfg.require_seed("noise-study");
  const SegmentModel model = segment_model(cfg);
  const NoiseStudyResult r = run_noise_study(model, cfg.noise_study);

  const fs::path dir = out_dir(o, cfg, "noise_study");
  write_trajectory_csv((dir / "trajectory.csv").string(), r.truth);
  for (std::size_t i = 0; i < r.rows.size(); ++i)
    series_csv(r.series[i]).write(dir / ("series_amp_" + amp_tag(r.rows[i].amplitude) + ".csv"));
  write_json(dir / "report.json", noise_study_report(cfg.noise_study, r));

  std::cout << "noise-study -> " << dir.string() << "\n";
  for (const auto& row : r.rows) {
    std::cout << " amplitude " << row.amplitude << "\n";
    print_errors("GMO", row.gmo);
    print_errors("JFD", row.jfd);
  }
  return kOk;
}

int cmd_sweep(const Options& o) {
  ScenarioConfig cfg = load(o, ScenarioKind::StateErrorSweep);
  cfg.sweep.seed = cfg.require_seed("sweep-state-error");
  const SegmentModel model = segment_model(cfg);
  const SweepResult r = run_state_error_sweep(model, cfg.sweep);

  const fs::path dir = out_dir(o, cfg, "sweep");
  sweep_polar_csv(r).write(dir / "polar.csv");
  write_json(dir / "report.json", sweep_report(cfg.sweep, r));

  std::cout << "sweep-state-error: " << r.trials.size() << " trials -> " << dir.string() << "\n";
  std::cout << "  error%   GMO mean x/y        JFD mean x/y     failed\n";
  for (const auto& l : r.levels)
    std::cout << "  " << 100.0 * l.error << "   " << l.gmo_mean.x() << " / " << l.gmo_mean.y() << "   "
              << l.jfd_mean.x() << " / " << l.jfd_mean.y() << "   " << l.failed << "\n";
  int failed = 0;
  for (const auto& l : r.levels) failed += l.failed;
  return failed ? kNumerical : kOk;
}

int cmd_multiseg(const Options& o) {
  const ScenarioConfig cfg = load(o, ScenarioKind::MultisegLumped);
  if (cfg.proximal.empty()) throw ConfigError(o.config + ": multiseg.proximal is required");
  const SegmentParams prox = config::load_segment(cfg.proximal);
  const SegmentParams dist = config::load_segment(cfg.segment);
  const MultisegResult r = run_multiseg(prox, dist, cfg.multiseg);

  const fs::path dir = out_dir(o, cfg, "multiseg");
  write_trajectory_csv((dir / "proximal.csv").string(), r.proximal);
  write_trajectory_csv((dir / "distal.csv").string(), r.distal);
  series_csv(r.proximal_series).write(dir / "proximal_series.csv");
  series_csv(r.distal_series).write(dir / "distal_series.csv");
  write_json(dir / "report.json", multiseg_report(cfg.multiseg, r));

  std::cout << "multiseg -> " << dir.string() << "  (reaction shifts proximal c_end by "
            << r.reaction_shift << ")\n";
  for (const auto& row : r.rows) {
    std::cout << " " << row.segment << " s_c = " << row.s_c << " m\n";
    print_errors("GMO", row.gmo);
    print_errors("JFD", row.jfd);
  }
  return kOk;
}

int cmd_calibrate(const Options& o) {
  const ScenarioConfig cfg = load(o, ScenarioKind::CalibrationSynthetic);
  const SegmentParams truth = config::load_segment(cfg.segment);
  const auto& cc = cfg.calibration;
  const fs::path dir = out_dir(o, cfg, "calibration");

  CalibrationProblem prob = cc.problem;
  prob.base = truth;
  if (cc.recorded) {
    prob.recorded = read_trajectory_csv(cc.recorded->string());
  } else {
    prob.recorded = synthesize_calibration_data(truth, cc.excitation, cc.synthesis);
    write_trajectory_csv((dir / "recorded.csv").string(), prob.recorded);
  }

  const CalibrationResult r = calibrate(prob, [](const CalibrationResult& p) {
    if (p.evaluations % 20 == 0)
      std::cerr << "  eval " << p.evaluations << "  best " << p.best_history.back() << "\n";
  });

  CsvTable hist({"evaluation", "best_objective"});
  for (std::size_t i = 0; i < r.best_history.size(); ++i) hist.add({double(i + 1), r.best_history[i]});
  hist.write(dir / "history.csv");
  json rep = calibration_report(r);
  if (!cc.recorded) rep["alpha_true"] = vec_json(truth.alpha());
  write_json(dir / "report.json", rep);

  std::cout << "calibrate -> " << dir.string() << "\n  alpha " << r.alpha.transpose() << "\n";
  if (!cc.recorded)
    std::cout << "  relative error " << (r.alpha - truth.alpha()).cwiseQuotient(truth.alpha()).transpose()
              << "\n";
  std::cout << "  tip rmse (mm) " << r.rmse_tip_mm.transpose() << "  evaluations " << r.evaluations
            << " (+" << r.seed_evaluations << " seed)  " << r.seconds << " s\n";
  return std::isfinite(r.full_replay_objective) ? kOk : kNumerical;
}

int cmd_estimate(const Options& o) {
  const ScenarioConfig cfg = load(o, std::nullopt);
  const SegmentModel model = segment_model(cfg);
  const Trajectory tr = read_trajectory_csv(o.replay);
  tr.validate();
  const auto& s = cfg.simulate;
  EstimatorInputs in = exact_inputs(tr);
  if (s.noise > 0.0)
    in = noisy_inputs(tr, NoiseSpec{s.noise, cfg.require_seed("estimate with noise"), s.noise_kind},
                      s.smoothing_window);
  const EstimationSeries es = run_estimators(model, in, cfg.estimator, tr.w_true);

  const fs::path dir = out_dir(o, cfg, "estimate");
  series_csv(es).write(dir / "series.csv");
  write_json(dir / "report.json", estimation_report("replay", cfg.estimator, es));
  std::cout << "estimate: " << tr.size() << " samples from " << o.replay << " -> " << dir.string() << "\n";
  print_errors("GMO", force_errors(es.w_true, es.w_gmo));
  print_errors("JFD", force_errors(es.w_true, es.w_jfd));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contact wrench estimation for tendon-driven continuum segments"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Scenario TOML file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "RNG seed (overrides the config)");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--jobs", o.jobs, "Worker threads for sweeps")->check(CLI::PositiveNumber);
  };
  auto* sim = app.add_subcommand("simulate", "Ramp a tip wrench in and run both estimators");
  auto* noise = app.add_subcommand("noise-study", "Estimator accuracy against sensor noise");
  auto* sweep = app.add_subcommand("sweep-state-error", "Randomized wrenches against state error levels");
  auto* cal = app.add_subcommand("calibrate", "Fit EI_x, EI_y, mu1, mu2 to a chirp trajectory");
  auto* multi = app.add_subcommand("multiseg", "Proximal segment with the distal one lumped in");
  auto* est = app.add_subcommand("estimate", "Run the estimators on a recorded trajectory CSV");
  for (auto* s : {sim, noise, sweep, cal, multi, est}) common(s);
  est->add_option("--replay", o.replay, "Trajectory CSV")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    if (sim->parsed()) return cmd_simulate(o);
    if (noise->parsed()) return cmd_noise_study(o);
    if (sweep->parsed()) return cmd_sweep(o);
    if (cal->parsed()) return cmd_calibrate(o);
    if (multi->parsed()) return cmd_multiseg(o);
    if (est->parsed()) return cmd_estimate(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kValidation;
}
