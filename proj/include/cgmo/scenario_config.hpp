#pragma once

// Scenario files for the command-line harness. Layout:
//
//   scenario = "noise-study"        # optional; must match the verb if given
//   segment  = "distal.toml"        # relative to this file
//   seed     = 42                   # required for stochastic scenarios
//   out      = "out/noise"          # optional; --out overrides
//
//   [estimator]   gain, window, reset_horizon, W, dx_bound, post_filter_gmo, post_filter_jfd
//   [integrator]  rtol, atol, sample_rate, max_step
//   [simulate] [noise_study] [sweep] [multiseg] [calibration]   per-scenario tables

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "cgmo/config.hpp"
#include "cgmo/scenarios.hpp"

namespace cgmo::config {

enum class ScenarioKind { NoiselessOracle, NoiseStudy, StateErrorSweep, CalibrationSynthetic, MultisegLumped };

inline const char* scenario_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::NoiselessOracle: return "noiseless-oracle";
    case ScenarioKind::NoiseStudy: return "noise-study";
    case ScenarioKind::StateErrorSweep: return "state-error-sweep";
    case ScenarioKind::CalibrationSynthetic: return "calibration-synthetic";
    case ScenarioKind::MultisegLumped: return "multiseg-lumped";
  }
  return "?";
}

inline ScenarioKind parse_scenario_kind(const std::string& s) {
  for (auto k : {ScenarioKind::NoiselessOracle, ScenarioKind::NoiseStudy, ScenarioKind::StateErrorSweep,
                 ScenarioKind::CalibrationSynthetic, ScenarioKind::MultisegLumped})
    if (s == scenario_name(k)) return k;
  throw ConfigError("scenario: unknown kind '" + s +
                    "' (noiseless-oracle, noise-study, state-error-sweep, calibration-synthetic, multiseg-lumped)");
}

/// Single tip-contact run: a wrench and capstan torques ramped in from the
/// straight configuration, then held.
struct SimulateConfig {
  double duration = 2.0;
  double ramp = 1.0;
  Vec6 wrench = (Vec6() << 10.0, -10.0, 0.0, 0.0, 0.0, 0.0).finished();  // [f; m] in the contact frame
  Vec2 tau = Vec2::Zero();
  double s_c = -1.0;  // < 0: tip
  double noise = 0.0;
  int smoothing_window = 10;
  NoiseKind noise_kind = NoiseKind::Uniform;
};

struct CalibrationConfig {
  CalibrationProblem problem;     // base and recorded are filled by the harness
  ChirpExcitation excitation;
  IntegratorOptions synthesis{1e-7, 1e-9, 100.0};
  std::optional<std::filesystem::path> recorded;  // replay CSV instead of synthetic data
};

struct ScenarioConfig {
  std::filesystem::path source;
  std::optional<ScenarioKind> kind;
  std::filesystem::path segment;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;

  scenarios::EstimatorSettings estimator;
  IntegratorOptions integrator{};
  SimulateConfig simulate;
  scenarios::NoiseStudyConfig noise_study;
  scenarios::SweepConfig sweep;
  scenarios::MultisegConfig multiseg;
  std::filesystem::path proximal;
  CalibrationConfig calibration;

  /// Seed after applying an override; throws when a stochastic run has none.
  std::uint64_t require_seed(const char* what) const {
    if (!seed) throw ConfigError(std::string(what) + " needs a seed (config key 'seed' or --seed)");
    return *seed;
  }
};

namespace detail {

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path q(p);
  return q.is_absolute() ? q : base / q;
}

inline void require_file(const std::filesystem::path& p, const std::string& key) {
  if (!std::filesystem::is_regular_file(p)) throw ConfigError(key + ": file not found: " + p.string());
}

inline NoiseKind noise_kind(const Section& s, std::string_view key) {
  const std::string k = s.string(key, "uniform");
  if (k == "uniform") return NoiseKind::Uniform;
  if (k == "gaussian") return NoiseKind::Gaussian;
  throw ConfigError(s.where(key) + ": expected 'uniform' or 'gaussian'");
}

template <int N>
Eigen::Matrix<double, N, 1> vec_of(const std::vector<double>& v) {
  Eigen::Matrix<double, N, 1> out;
  for (int i = 0; i < N; ++i) out(i) = v[i];
  return out;
}

inline int positive_int(const Section& s, std::string_view key, long fallback, long lo = 1) {
  const long v = s.integer(key, fallback);
  if (v < lo) throw ConfigError(s.where(key) + ": must be >= " + std::to_string(lo));
  return static_cast<int>(v);
}

}  // namespace detail

inline scenarios::EstimatorSettings estimator_from(const Section& s, scenarios::EstimatorSettings e) {
  if (s.has("gain")) e.gmo.gains = detail::vec_of<6>(s.broadcast("gain", Dim::Frequency, 6));
  e.gmo.window = detail::positive_int(s, "window", e.gmo.window, 0);
  e.gmo.reset_horizon = detail::positive_int(s, "reset_horizon", e.gmo.reset_horizon);
  if (s.has("W")) e.wrench.W = detail::vec_of<6>(s.broadcast("W", Dim::None, 6));
  if (s.has("dx_bound")) e.dx_bound = detail::vec_of<12>(s.broadcast("dx_bound", Dim::None, 12));
  e.post_filter_gmo = detail::positive_int(s, "post_filter_gmo", e.post_filter_gmo, 0);
  e.post_filter_jfd = detail::positive_int(s, "post_filter_jfd", e.post_filter_jfd, 0);
  if (s.has("constraints")) {
    const std::string c = s.string("constraints");
    if (c == "point")
      e.wrench.A = point_contact_constraints();
    else if (c == "none")
      e.wrench.A = Eigen::MatrixXd::Zero(0, 6);
    else
      throw ConfigError(s.where("constraints") + ": expected 'point' or 'none'");
  }
  e.validate();
  return e;
}

inline IntegratorOptions integrator_from(const Section& s, IntegratorOptions o) {
  o.rtol = s.quantity("rtol", Dim::None, o.rtol);
  o.atol = s.quantity("atol", Dim::None, o.atol);
  o.sample_rate = s.quantity("sample_rate", Dim::Frequency, o.sample_rate);
  o.max_step = s.quantity("max_step", Dim::Time, o.max_step);
  if (!(o.rtol > 0.0 && o.atol > 0.0 && o.sample_rate > 0.0 && o.max_step > 0.0))
    throw ConfigError(s.path() + ": rtol, atol, sample_rate and max_step must be positive");
  return o;
}

inline ScenarioConfig scenario_from_toml(const toml::table& root, const std::filesystem::path& source) {
  const Section top(&root, "");
  const auto base = source.has_parent_path() ? source.parent_path() : std::filesystem::path(".");
  ScenarioConfig cfg;
  cfg.source = source;
  if (top.has("scenario")) cfg.kind = parse_scenario_kind(top.string("scenario"));
  cfg.segment = detail::resolve(base, top.string("segment"));
  detail::require_file(cfg.segment, "segment");
  if (top.has("seed")) {
    const long s = top.integer("seed");
    if (s < 0) throw ConfigError("seed: must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(s);
  }
  if (top.has("out")) cfg.out = detail::resolve(base, top.string("out"));

  cfg.integrator = integrator_from(top.sub("integrator"), cfg.integrator);

  // per-scenario estimator defaults, then the shared [estimator] table on top
  const Section est = top.sub("estimator");
  cfg.estimator = estimator_from(est, cfg.estimator);

  {
    const Section s = top.sub("simulate");
    auto& c = cfg.simulate;
    c.duration = s.quantity("duration", Dim::Time, c.duration);
    c.ramp = s.quantity("ramp", Dim::Time, c.ramp);
    if (s.has("force")) c.wrench.head<3>() = detail::vec_of<3>(s.quantities("force", Dim::Force, 3));
    if (s.has("moment")) c.wrench.tail<3>() = detail::vec_of<3>(s.quantities("moment", Dim::Torque, 3));
    if (s.has("tau")) c.tau = detail::vec_of<2>(s.quantities("tau", Dim::Torque, 2));
    c.s_c = s.quantity("s_c", Dim::Length, c.s_c);
    c.noise = s.quantity("noise", Dim::None, c.noise);
    c.smoothing_window = detail::positive_int(s, "smoothing_window", c.smoothing_window);
    c.noise_kind = detail::noise_kind(s, "noise_kind");
    if (!(c.duration > 0.0 && c.ramp >= 0.0 && c.noise >= 0.0))
      throw ConfigError("simulate: duration must be positive, ramp and noise nonnegative");
  }
  {
    const Section s = top.sub("noise_study");
    auto& c = cfg.noise_study;
    c.duration = s.quantity("duration", Dim::Time, c.duration);
    c.ramp = s.quantity("ramp", Dim::Time, c.ramp);
    if (s.has("force")) c.force = detail::vec_of<2>(s.quantities("force", Dim::Force, 2));
    if (s.has("amplitudes")) c.amplitudes = s.quantities("amplitudes", Dim::None, 0);
    c.smoothing_window = detail::positive_int(s, "smoothing_window", c.smoothing_window);
    c.noise_kind = detail::noise_kind(s, "noise");
    c.integrator = cfg.integrator;
    c.estimator = estimator_from(est, c.estimator);
    if (s.has("gain")) c.estimator.gmo.gains = detail::vec_of<6>(s.broadcast("gain", Dim::Frequency, 6));
    for (double a : c.amplitudes)
      if (!(a >= 0.0)) throw ConfigError("noise_study.amplitudes: must be >= 0");
  }
  {
    const Section s = top.sub("sweep");
    auto& c = cfg.sweep;
    c.n_wrenches = detail::positive_int(s, "wrenches", c.n_wrenches);
    c.levels = detail::positive_int(s, "levels", c.levels);
    c.max_error = s.quantity("max_error", Dim::None, c.max_error);
    c.force_max = s.quantity("force_max", Dim::Force, c.force_max);
    c.torque_max = s.quantity("torque_max", Dim::Torque, c.torque_max);
    c.duration = s.quantity("duration", Dim::Time, c.duration);
    c.jobs = detail::positive_int(s, "jobs", c.jobs);
    c.integrator = cfg.integrator;
    c.estimator = estimator_from(est, c.estimator);
    c.validate();
  }
  {
    const Section s = top.sub("multiseg");
    auto& c = cfg.multiseg;
    if (s.has("proximal")) {
      cfg.proximal = detail::resolve(base, s.string("proximal"));
      detail::require_file(cfg.proximal, "multiseg.proximal");
    }
    c.duration = s.quantity("duration", Dim::Time, c.duration);
    c.ramp = s.quantity("ramp", Dim::Time, c.ramp);
    if (s.has("gravity")) c.gravity = detail::vec_of<3>(s.quantities("gravity", Dim::Acceleration, 3));
    if (s.has("force_proximal"))
      c.force_proximal = detail::vec_of<2>(s.quantities("force_proximal", Dim::Force, 2));
    if (s.has("force_distal")) c.force_distal = detail::vec_of<2>(s.quantities("force_distal", Dim::Force, 2));
    if (s.has("tau_proximal")) c.tau_proximal = detail::vec_of<2>(s.quantities("tau_proximal", Dim::Torque, 2));
    if (s.has("tau_distal")) c.tau_distal = detail::vec_of<2>(s.quantities("tau_distal", Dim::Torque, 2));
    c.tau_elbow = s.quantity("tau_elbow", Dim::Torque, c.tau_elbow);
    c.s_c_proximal = s.quantity("s_c_proximal", Dim::Length, c.s_c_proximal);
    c.s_c_distal = s.quantity("s_c_distal", Dim::Length, c.s_c_distal);
    c.integrator = cfg.integrator;
    c.estimator = estimator_from(est, c.estimator);
  }
  {
    const Section s = top.sub("calibration");
    auto& c = cfg.calibration;
    auto& p = c.problem;
    if (s.has("alpha_max")) {
      const auto a = s.quantities("alpha_max", Dim::None, 4);
      p.alpha_max = Alpha(a[0], a[1], a[2], a[3]);
    }
    if (s.has("alpha0")) {
      const auto a = s.quantities("alpha0", Dim::None, 4);
      p.alpha0 = Alpha(a[0], a[1], a[2], a[3]);
    }
    p.max_evaluations = detail::positive_int(s, "max_evaluations", p.max_evaluations);
    p.seed_evaluations = detail::positive_int(s, "seed_evaluations", p.seed_evaluations, 0);
    p.tolerance = s.quantity("tolerance", Dim::None, p.tolerance);
    p.x_tolerance = s.quantity("x_tolerance", Dim::None, p.x_tolerance);
    p.initial_step = s.quantity("initial_step", Dim::None, p.initial_step);
    p.refine_step = s.quantity("refine_step", Dim::None, p.refine_step);
    p.shooting_window = s.quantity("shooting_window", Dim::Time, p.shooting_window);
    p.integrator = integrator_from(s.sub("integrator"), p.integrator);
    auto& ex = c.excitation;
    ex.q_max = s.quantity("q_max", Dim::Angle, ex.q_max);
    ex.f_start = s.quantity("f_start", Dim::Frequency, ex.f_start);
    ex.f_end = s.quantity("f_end", Dim::Frequency, ex.f_end);
    ex.t_f = s.quantity("duration", Dim::Time, ex.t_f);
    ex.phi0 = s.quantity("phi0", Dim::Angle, ex.phi0);
    ex.ramp = s.quantity("ramp", Dim::Time, ex.ramp);
    ex.kp = s.quantity("kp", Dim::None, ex.kp);
    ex.kd = s.quantity("kd", Dim::None, ex.kd);
    ex.validate();
    c.synthesis = integrator_from(s.sub("synthesis"), c.synthesis);
    if (s.has("recorded")) {
      c.recorded = detail::resolve(base, s.string("recorded"));
      detail::require_file(*c.recorded, "calibration.recorded");
    }
  }
  return cfg;
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
  try {
    return scenario_from_toml(parse_file(path), path);
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path.string(), 0) == 0) throw;
    throw ConfigError(path.string() + ": " + msg);
  }
}

}  // namespace cgmo::config
