#pragma once

// Simulation studies built on the library: sensor-noise study, state-error
// sweep, lumped two-segment run, trajectory replay, and plot-ready exports.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cgmo/calibration.hpp"
#include "cgmo/contact_estimation.hpp"
#include "cgmo/dynamics.hpp"
#include "cgmo/params.hpp"
#include "cgmo/simulator.hpp"

namespace cgmo::scenarios {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Estimator pipeline

struct EstimatorSettings {
  GmoConfig gmo;
  WrenchEstimationProblem wrench;
  Vec12d dx_bound = Vec12d::Zero();  // state-error bound for thresholds; all zero skips them
  int post_filter_gmo = 0;           // causal Gaussian window on r and w~; 0 = none
  int post_filter_jfd = 0;           // same for kappa~ and w~ of the JFD

  bool thresholds_enabled() const { return (dx_bound.array() > 0.0).any(); }

  void validate() const {
    gmo.validate();
    wrench.validate();
    if (!(dx_bound.array() >= 0.0).all()) throw ConfigError("dx_bound must be >= 0");
    if (post_filter_gmo < 0 || post_filter_jfd < 0) throw ConfigError("post filters must be >= 0");
  }
};

/// What the estimators are fed: possibly noisy or biased states, derivative
/// estimates and the applied torques.
struct EstimatorInputs {
  std::vector<double> t;
  std::vector<SegmentState> x;
  std::vector<Vec6> cddot;
  std::vector<Vec2> tau;
  std::vector<double> s_c;
  std::vector<Vec6> extra;  // known generalized forces beyond the segment model; may be empty

  std::size_t size() const { return t.size(); }
  double dt() const { return (t.back() - t.front()) / static_cast<double>(t.size() - 1); }
};

inline EstimatorInputs exact_inputs(const Trajectory& tr) {
  EstimatorInputs in;
  in.t = tr.t;
  for (std::size_t k = 0; k < tr.size(); ++k) in.x.push_back(tr.state(k));
  in.cddot = tr.cddot;
  in.tau = tr.tau;
  in.s_c = tr.s_c;
  return in;
}

/// Noise on c; cd and cdd from causal smoothing followed by differencing.
inline EstimatorInputs noisy_inputs(const Trajectory& tr, const NoiseSpec& noise, int window) {
  const Trajectory noisy = add_noise(tr, noise);
  const double dt = tr.dt();
  const auto cd = smoothed_derivative(noisy.c, window, dt);
  const auto cdd = smoothed_derivative(cd, window, dt);
  EstimatorInputs in;
  in.t = tr.t;
  for (std::size_t k = 0; k < tr.size(); ++k) in.x.push_back({noisy.c[k], cd[k]});
  in.cddot = cdd;
  in.tau = tr.tau;
  in.s_c = tr.s_c;
  return in;
}

/// Constant multiplicative state error x_used = (1 + eps) x; the JFD
/// acceleration is the backward difference of the biased rates.
inline EstimatorInputs scaled_inputs(const Trajectory& tr, double eps) {
  EstimatorInputs in;
  in.t = tr.t;
  std::vector<Vec6> cd;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    in.x.push_back({(1.0 + eps) * tr.c[k], (1.0 + eps) * tr.cdot[k]});
    cd.push_back(in.x.back().cdot);
  }
  in.cddot = smoothed_derivative(cd, 1, tr.dt());
  in.tau = tr.tau;
  in.s_c = tr.s_c;
  return in;
}

struct EstimationSeries {
  std::vector<double> t;
  std::vector<Vec6> r, kappa_jfd, thresholds;
  std::vector<Wrench> w_gmo, w_jfd, w_true;
  std::vector<Detection> detected;
};

template <typename V>
std::vector<V> maybe_smooth(const std::vector<V>& x, int window) {
  if (window <= 1 || x.size() < static_cast<std::size_t>(window)) return x;
  return causal_gaussian_smooth(x, window);
}

inline std::vector<Wrench> to_wrenches(const std::vector<Vec6>& v) {
  std::vector<Wrench> out;
  out.reserve(v.size());
  for (const auto& w : v) out.push_back(Wrench::from(w));
  return out;
}

inline std::vector<Vec6> to_vectors(const std::vector<Wrench>& v) {
  std::vector<Vec6> out;
  out.reserve(v.size());
  for (const auto& w : v) out.push_back(w.vec());
  return out;
}

/// Run GMO and JFD over the inputs. The GMO latches p1 at the first sample
/// and reports r = 0 there.
inline EstimationSeries run_estimators(const SegmentModel& model, const EstimatorInputs& in,
                                       EstimatorSettings set, const std::vector<Wrench>& w_true) {
  set.validate();
  const std::size_t n = in.size();
  if (n < 2) throw ConfigError("estimator inputs need at least two samples");
  if (in.x.size() != n || in.cddot.size() != n || in.tau.size() != n || in.s_c.size() != n ||
      (!in.extra.empty() && in.extra.size() != n) || (!w_true.empty() && w_true.size() != n))
    throw ConfigError("estimator input series have different lengths");
  set.gmo.dt = in.dt();

  EstimationSeries out;
  out.t = in.t;
  out.w_true = w_true.empty() ? std::vector<Wrench>(n) : w_true;

  MomentumObserver gmo(model, set.gmo);
  std::optional<ResidualSensitivity> sens;
  if (set.thresholds_enabled()) sens.emplace(model, set.gmo);
  gmo.init(in.x[0]);
  if (sens) sens->init();

  std::vector<Vec6> r(n, Vec6::Zero()), kap(n), thr(n, Vec6::Zero());
  for (std::size_t k = 0; k < n; ++k) {
    const Vec6 extra = in.extra.empty() ? Vec6::Zero() : in.extra[k];
    if (k > 0) {
      r[k] = gmo.step(in.x[k], in.tau[k], extra);
      if (sens) thr[k] = detection_thresholds(sens->step(in.x[k], in.tau[k], extra), set.dx_bound);
    }
    kap[k] = jfd(model, in.x[k], in.cddot[k], in.tau[k], extra);
  }
  r = maybe_smooth(r, set.post_filter_gmo);
  kap = maybe_smooth(kap, set.post_filter_jfd);

  std::vector<Vec6> wg(n), wj(n);
  for (std::size_t k = 0; k < n; ++k) {
    WrenchEstimationProblem prob = set.wrench;
    prob.s_c = in.s_c[k];
    const Mat6 J = model.contact_jacobian(in.x[k].c, prob.s_c);
    wg[k] = estimate_wrench(r[k], prob, J).vec();
    wj[k] = estimate_wrench(kap[k], prob, J).vec();
  }
  out.w_gmo = to_wrenches(maybe_smooth(wg, set.post_filter_gmo));
  out.w_jfd = to_wrenches(maybe_smooth(wj, set.post_filter_jfd));
  out.r = std::move(r);
  out.kappa_jfd = std::move(kap);
  out.thresholds = std::move(thr);
  for (std::size_t k = 0; k < n; ++k)
    out.detected.push_back(set.thresholds_enabled() ? detect(out.r[k], out.thresholds[k]) : Detection{});
  return out;
}

// ---------------------------------------------------------------------------
// Error metrics

struct ForceErrors {
  double rmse_x = 0.0;
  double rmse_y = 0.0;
  double rmse_norm = 0.0;       // RMSE of |f - f~| (x, y components)
  double rmse_angle_deg = 0.0;  // RMSE of the angle between f and f~
};

inline ForceErrors force_errors(const std::vector<Wrench>& truth, const std::vector<Wrench>& est) {
  if (truth.size() != est.size() || truth.empty()) throw DomainError("force error series mismatch");
  ForceErrors e;
  double sa = 0.0;
  std::size_t na = 0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const Eigen::Vector2d a = truth[k].f.head<2>(), b = est[k].f.head<2>();
    e.rmse_x += std::pow(a.x() - b.x(), 2);
    e.rmse_y += std::pow(a.y() - b.y(), 2);
    e.rmse_norm += (a - b).squaredNorm();
    if (a.norm() > 1e-9 && b.norm() > 1e-9) {
      const double cosang = std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0);
      sa += std::pow(std::acos(cosang) * 180.0 / std::numbers::pi, 2);
      ++na;
    }
  }
  const double n = static_cast<double>(truth.size());
  e.rmse_x = std::sqrt(e.rmse_x / n);
  e.rmse_y = std::sqrt(e.rmse_y / n);
  e.rmse_norm = std::sqrt(e.rmse_norm / n);
  e.rmse_angle_deg = na ? std::sqrt(sa / static_cast<double>(na)) : 0.0;
  return e;
}

/// Time intervals [start, end] during which any element is detected.
inline std::vector<std::pair<double, double>> detected_spans(const EstimationSeries& s) {
  std::vector<std::pair<double, double>> spans;
  bool on = false;
  for (std::size_t k = 0; k < s.t.size(); ++k) {
    if (s.detected[k].any && !on) {
      spans.push_back({s.t[k], s.t[k]});
      on = true;
    }
    if (on) {
      if (s.detected[k].any)
        spans.back().second = s.t[k];
      else
        on = false;
    }
  }
  return spans;
}

// ---------------------------------------------------------------------------
// Parallel map with ordered results

template <typename F>
void parallel_for(std::size_t n, int jobs, F&& body) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 0; j < std::min<int>(jobs, static_cast<int>(n)); ++j) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

/// Linear ramp from 0 at t = 0 to 1 at t = ramp, then held.
inline double ramp_factor(double t, double ramp) {
  if (ramp <= 0.0) return 1.0;
  return std::clamp(t / ramp, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Sensor-noise study

struct NoiseStudyConfig {
  double duration = 2.0;
  double ramp = 1.0;
  Eigen::Vector2d force{10.0, -10.0};  // tip force in the tip frame, N
  std::vector<double> amplitudes{0.0, 0.001, 0.01};
  int smoothing_window = 10;
  NoiseKind noise_kind = NoiseKind::Uniform;
  std::uint64_t seed = 42;
  EstimatorSettings estimator = [] {
    EstimatorSettings s;
    s.gmo.gains = Vec6::Constant(10.0);
    return s;
  }();
  IntegratorOptions integrator{};
};

struct NoiseStudyRow {
  double amplitude = 0.0;
  ForceErrors gmo, jfd;
};

struct NoiseStudyResult {
  Trajectory truth;
  std::vector<NoiseStudyRow> rows;
  std::vector<EstimationSeries> series;
};

inline Trajectory simulate_tip_ramp(const SegmentModel& model, double duration, double ramp,
                                    const Eigen::Vector2d& force, const Vec2& tau,
                                    const IntegratorOptions& opt, double s_c = -1.0,
                                    const ExtraForceFn& extra = nullptr) {
  const double sc = s_c < 0.0 ? model.length() : s_c;
  auto contact = [&](double t) {
    Wrench w;
    w.f.head<2>() = ramp_factor(t, ramp) * force;
    return ContactInput{w, sc};
  };
  auto torque = [&](double t, const SegmentState&) { return Vec2(ramp_factor(t, ramp) * tau); };
  return integrate(model, SegmentState{}, torque, contact, 0.0, duration, opt, extra);
}

inline NoiseStudyResult run_noise_study(const SegmentModel& model, const NoiseStudyConfig& cfg) {
  if (!(cfg.duration > 0.0) || cfg.amplitudes.empty())
    throw ConfigError("noise study needs a positive duration and at least one amplitude");
  NoiseStudyResult res;
  res.truth = simulate_tip_ramp(model, cfg.duration, cfg.ramp, cfg.force, Vec2::Zero(), cfg.integrator);
  for (double a : cfg.amplitudes) {
    const EstimatorInputs in = a == 0.0
                                   ? exact_inputs(res.truth)
                                   : noisy_inputs(res.truth, NoiseSpec{a, cfg.seed, cfg.noise_kind},
                                                  cfg.smoothing_window);
    EstimationSeries s = run_estimators(model, in, cfg.estimator, res.truth.w_true);
    res.rows.push_back({a, force_errors(s.w_true, s.w_gmo), force_errors(s.w_true, s.w_jfd)});
    res.series.push_back(std::move(s));
  }
  return res;
}

// ---------------------------------------------------------------------------
// State-error sweep

struct SweepConfig {
  int n_wrenches = 21;
  int levels = 10;          // 0 .. max_error inclusive
  double max_error = 0.20;  // fractional
  double force_max = 50.0;
  double torque_max = 2.0;
  double duration = 1.0;    // the ramp spans the whole run
  std::uint64_t seed = 42;
  int jobs = 1;
  EstimatorSettings estimator{};  // gains 25 I, W = I, point contact
  IntegratorOptions integrator{};

  void validate() const {
    if (n_wrenches < 1 || levels < 1) throw ConfigError("sweep needs >= 1 wrench and level");
    if (!(max_error >= 0.0 && force_max >= 0.0 && torque_max >= 0.0 && duration > 0.0))
      throw ConfigError("sweep ranges must be nonnegative and duration positive");
    estimator.validate();
  }

  double level_error(int i) const {
    return levels == 1 ? 0.0 : max_error * i / static_cast<double>(levels - 1);
  }
};

struct SweepCase {
  Eigen::Vector2d force;
  Vec2 tau;
};

/// Deterministic draws: fx, fy, tau1, tau2 per case, uniform on the boxes.
inline std::vector<SweepCase> sweep_cases(const SweepConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> f(-cfg.force_max, cfg.force_max);
  std::uniform_real_distribution<double> tq(-cfg.torque_max, cfg.torque_max);
  std::vector<SweepCase> out;
  for (int i = 0; i < cfg.n_wrenches; ++i) {
    SweepCase c;
    c.force.x() = f(rng);
    c.force.y() = f(rng);
    c.tau(0) = tq(rng);
    c.tau(1) = tq(rng);
    out.push_back(c);
  }
  return out;
}

struct SweepTrial {
  int case_index = 0;
  int level = 0;
  double error = 0.0;
  SweepCase input{};
  bool ok = true;
  std::string failure;
  ForceErrors gmo, jfd;
};

struct SweepLevel {
  double error = 0.0;
  int trials = 0;
  int failed = 0;
  Eigen::Vector2d gmo_mean = Eigen::Vector2d::Zero(), gmo_max = Eigen::Vector2d::Zero();
  Eigen::Vector2d jfd_mean = Eigen::Vector2d::Zero(), jfd_max = Eigen::Vector2d::Zero();
};

struct SweepResult {
  std::vector<SweepTrial> trials;  // ordered by (case, level)
  std::vector<SweepLevel> levels;
};

inline SweepResult run_state_error_sweep(const SegmentModel& model, const SweepConfig& cfg) {
  cfg.validate();
  const auto cases = sweep_cases(cfg);
  SweepResult res;
  res.trials.resize(cases.size() * cfg.levels);
  parallel_for(cases.size(), cfg.jobs, [&](std::size_t i) {
    Trajectory tr;
    std::string failure;
    try {
      tr = simulate_tip_ramp(model, cfg.duration, cfg.duration, cases[i].force, cases[i].tau,
                             cfg.integrator);
    } catch (const std::exception& e) {
      failure = e.what();
    }
    for (int l = 0; l < cfg.levels; ++l) {
      SweepTrial& t = res.trials[i * cfg.levels + l];
      t.case_index = static_cast<int>(i);
      t.level = l;
      t.error = cfg.level_error(l);
      t.input = cases[i];
      if (!failure.empty()) {
        t.ok = false;
        t.failure = failure;
        continue;
      }
      try {
        const EstimationSeries s = run_estimators(model, scaled_inputs(tr, t.error), cfg.estimator, tr.w_true);
        t.gmo = force_errors(s.w_true, s.w_gmo);
        t.jfd = force_errors(s.w_true, s.w_jfd);
      } catch (const std::exception& e) {
        t.ok = false;
        t.failure = e.what();
      }
    }
  });
  for (int l = 0; l < cfg.levels; ++l) {
    SweepLevel lv;
    lv.error = cfg.level_error(l);
    for (const auto& t : res.trials) {
      if (t.level != l) continue;
      if (!t.ok) {
        ++lv.failed;
        continue;
      }
      ++lv.trials;
      const Eigen::Vector2d g(t.gmo.rmse_x, t.gmo.rmse_y), j(t.jfd.rmse_x, t.jfd.rmse_y);
      lv.gmo_mean += g;
      lv.jfd_mean += j;
      lv.gmo_max = lv.gmo_max.cwiseMax(g);
      lv.jfd_max = lv.jfd_max.cwiseMax(j);
    }
    if (lv.trials) {
      lv.gmo_mean /= lv.trials;
      lv.jfd_mean /= lv.trials;
    }
    res.levels.push_back(lv);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Two segments: proximal with the distal segment lumped into its end disk

struct MultisegConfig {
  double duration = 2.0;
  double ramp = 1.0;
  Vec3 gravity{0.0, 9.81, 0.0};
  Eigen::Vector2d force_proximal{10.0, -10.0};
  Eigen::Vector2d force_distal{5.0, 5.0};
  Vec2 tau_proximal = Vec2::Zero();
  Vec2 tau_distal{0.5, -0.5};
  double tau_elbow = 0.3;
  double s_c_proximal = -1.0;  // < 0: tip
  double s_c_distal = 0.213293;
  EstimatorSettings estimator{};
  IntegratorOptions integrator{};
};

struct MultisegRow {
  std::string segment;
  double s_c = 0.0;
  ForceErrors gmo, jfd;
};

struct MultisegResult {
  std::vector<MultisegRow> rows;
  Trajectory proximal, proximal_without_reaction, distal;
  EstimationSeries proximal_series, distal_series;
  double reaction_shift = 0.0;  // |c_end with - c_end without| of the proximal segment
};

inline MultisegResult run_multiseg(const SegmentParams& proximal, const SegmentParams& distal,
                                   const MultisegConfig& cfg) {
  SegmentParams prox = lump_distal_segment(proximal, distal);
  prox.g = cfg.gravity;
  SegmentParams dist = distal;
  dist.g = cfg.gravity;
  const SegmentModel mp(prox), md(dist);
  const double sc_p = cfg.s_c_proximal < 0.0 ? prox.L : cfg.s_c_proximal;
  if (cfg.s_c_distal < 0.0 || cfg.s_c_distal > dist.L)
    throw ConfigError("distal contact arclength outside [0, L]");

  auto reaction = [&](double t, const ModalCoefficients& c) {
    const double a = ramp_factor(t, cfg.ramp);
    return mp.distal_reaction(a * cfg.tau_elbow, a * cfg.tau_distal, c);
  };
  MultisegResult res;
  res.proximal = simulate_tip_ramp(mp, cfg.duration, cfg.ramp, cfg.force_proximal, cfg.tau_proximal,
                                   cfg.integrator, sc_p,
                                   [&](double t, const SegmentState& x) { return reaction(t, x.c); });
  res.proximal_without_reaction = simulate_tip_ramp(mp, cfg.duration, cfg.ramp, cfg.force_proximal,
                                                    cfg.tau_proximal, cfg.integrator, sc_p);
  res.reaction_shift = (res.proximal.c.back() - res.proximal_without_reaction.c.back()).norm();
  res.distal = simulate_tip_ramp(md, cfg.duration, cfg.ramp, cfg.force_distal, cfg.tau_distal,
                                 cfg.integrator, cfg.s_c_distal);

  EstimatorInputs pin = exact_inputs(res.proximal);
  for (std::size_t k = 0; k < res.proximal.size(); ++k)
    pin.extra.push_back(reaction(res.proximal.t[k], res.proximal.c[k]));
  res.proximal_series = run_estimators(mp, pin, cfg.estimator, res.proximal.w_true);
  res.distal_series = run_estimators(md, exact_inputs(res.distal), cfg.estimator, res.distal.w_true);
  res.rows.push_back({"proximal", sc_p, force_errors(res.proximal_series.w_true, res.proximal_series.w_gmo),
                      force_errors(res.proximal_series.w_true, res.proximal_series.w_jfd)});
  res.rows.push_back({"distal", cfg.s_c_distal, force_errors(res.distal_series.w_true, res.distal_series.w_gmo),
                      force_errors(res.distal_series.w_true, res.distal_series.w_jfd)});
  return res;
}

// ---------------------------------------------------------------------------
// Reports and plot data

inline json vec_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline json errors_json(const ForceErrors& e) {
  return {{"rmse_x_N", e.rmse_x}, {"rmse_y_N", e.rmse_y}, {"rmse_norm_N", e.rmse_norm},
          {"rmse_angle_deg", e.rmse_angle_deg}};
}

inline json settings_json(const EstimatorSettings& s) {
  return {{"gain", vec_json(s.gmo.gains)},
          {"window", s.gmo.window},
          {"reset_horizon", s.gmo.reset_horizon},
          {"W", vec_json(s.wrench.W)},
          {"dx_bound", vec_json(s.dx_bound)},
          {"post_filter_gmo", s.post_filter_gmo},
          {"post_filter_jfd", s.post_filter_jfd}};
}

inline json spans_json(const EstimationSeries& s) {
  json a = json::array();
  for (const auto& [t0, t1] : detected_spans(s)) a.push_back({t0, t1});
  return a;
}

/// Estimation report for one scenario run.
inline json estimation_report(const std::string& scenario, const EstimatorSettings& set,
                              const EstimationSeries& s) {
  const ForceErrors g = force_errors(s.w_true, s.w_gmo), j = force_errors(s.w_true, s.w_jfd);
  json rep = {{"scenario", scenario}, {"gmo", errors_json(g)}, {"jfd", errors_json(j)}};
  rep["rmse_x_N"] = g.rmse_x;
  rep["rmse_y_N"] = g.rmse_y;
  rep["gain"] = vec_json(set.gmo.gains);
  rep["window"] = set.gmo.window;
  rep["thresholds"] = s.thresholds.empty() ? json::array() : vec_json(s.thresholds.back());
  rep["detected_spans"] = spans_json(s);
  rep["settings"] = settings_json(set);
  return rep;
}

inline json noise_study_report(const NoiseStudyConfig& cfg, const NoiseStudyResult& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"amplitude", row.amplitude}, {"gmo", errors_json(row.gmo)}, {"jfd", errors_json(row.jfd)}});
  return {{"scenario", "noise-study"},
          {"seed", cfg.seed},
          {"smoothing_window", cfg.smoothing_window},
          {"noise", cfg.noise_kind == NoiseKind::Uniform ? "uniform" : "gaussian"},
          {"settings", settings_json(cfg.estimator)},
          {"rows", rows}};
}

inline json sweep_report(const SweepConfig& cfg, const SweepResult& r) {
  json levels = json::array();
  for (const auto& l : r.levels)
    levels.push_back({{"state_error_pct", 100.0 * l.error},
                      {"trials", l.trials},
                      {"failed", l.failed},
                      {"gmo", {{"mean_x_N", l.gmo_mean.x()}, {"max_x_N", l.gmo_max.x()},
                               {"mean_y_N", l.gmo_mean.y()}, {"max_y_N", l.gmo_max.y()}}},
                      {"jfd", {{"mean_x_N", l.jfd_mean.x()}, {"max_x_N", l.jfd_max.x()},
                               {"mean_y_N", l.jfd_mean.y()}, {"max_y_N", l.jfd_max.y()}}}});
  json failures = json::array();
  for (const auto& t : r.trials)
    if (!t.ok) failures.push_back({{"case", t.case_index}, {"level", t.level}, {"error", t.failure}});
  return {{"scenario", "state-error-sweep"},
          {"seed", cfg.seed},
          {"trials", r.trials.size()},
          {"settings", settings_json(cfg.estimator)},
          {"levels", levels},
          {"failures", failures}};
}

inline json multiseg_report(const MultisegConfig& cfg, const MultisegResult& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"segment", row.segment}, {"s_c_m", row.s_c}, {"gmo", errors_json(row.gmo)},
                    {"jfd", errors_json(row.jfd)}});
  return {{"scenario", "multiseg"},
          {"gravity", vec_json(cfg.gravity)},
          {"reaction_shift", r.reaction_shift},
          {"settings", settings_json(cfg.estimator)},
          {"rows", rows}};
}

inline json calibration_report(const CalibrationResult& r) {
  json hist = json::array();
  for (double f : r.best_history) hist.push_back(f);
  return {{"alpha", vec_json(r.alpha)},
          {"rmse_mm", vec_json(r.rmse_tip_mm)},
          {"iterations", r.iterations},
          {"evaluations", r.evaluations},
          {"seed_alpha", vec_json(r.seed_alpha)},
          {"seed_evaluations", r.seed_evaluations},
          {"failed_evaluations", r.failed_evaluations},
          {"objective", r.objective},
          {"full_replay_objective", r.full_replay_objective},
          {"rmse_c", vec_json(r.rmse_c)},
          {"best_history", hist}};
}

/// Generic numeric CSV with a header; numbers use the shortest round-trip form.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(const std::vector<double>& row) {
    if (row.size() != header_.size()) throw DomainError("CSV row width mismatch");
    rows_.push_back(row);
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (std::size_t i = 0; i < header_.size(); ++i) os << (i ? "," : "") << header_[i];
    os << "\n";
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << cgmo::detail::format_double(r[i]);
      os << "\n";
    }
    if (!os) throw std::runtime_error("write failed: " + path.string());
  }

  const std::vector<std::vector<double>>& rows() const { return rows_; }
  const std::vector<std::string>& header() const { return header_; }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<double>> rows_;
};

inline CsvTable read_csv_table(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw ConfigError(path.string() + ": empty file");
  std::vector<std::string> header;
  for (auto f : cgmo::detail::split_csv(line)) header.emplace_back(f);
  CsvTable t(header);
  int ln = 1;
  while (std::getline(is, line)) {
    ++ln;
    if (line.empty()) continue;
    std::vector<double> row;
    for (auto f : cgmo::detail::split_csv(line)) row.push_back(cgmo::detail::parse_double(f, path.string() + ":" + std::to_string(ln)));
    t.add(row);
  }
  return t;
}

/// One row per trial: polar-plot coordinates for both estimators.
inline CsvTable sweep_polar_csv(const SweepResult& r) {
  CsvTable t({"case", "state_error_pct", "fx", "fy", "tau1", "tau2", "ok", "gmo_rmse_x", "gmo_rmse_y",
              "gmo_we", "gmo_theta_deg", "jfd_rmse_x", "jfd_rmse_y", "jfd_we", "jfd_theta_deg"});
  for (const auto& s : r.trials)
    t.add({double(s.case_index), 100.0 * s.error, s.input.force.x(), s.input.force.y(), s.input.tau(0),
           s.input.tau(1), s.ok ? 1.0 : 0.0, s.gmo.rmse_x, s.gmo.rmse_y, s.gmo.rmse_norm,
           s.gmo.rmse_angle_deg, s.jfd.rmse_x, s.jfd.rmse_y, s.jfd.rmse_norm, s.jfd.rmse_angle_deg});
  return t;
}

/// r, kappa~, both wrench estimates, truth and thresholds over time.
inline CsvTable series_csv(const EstimationSeries& s) {
  std::vector<std::string> h{"t"};
  for (const char* p : {"r", "kappa", "thr"})
    for (int i = 1; i <= 6; ++i) h.push_back(std::string(p) + std::to_string(i));
  for (const char* p : {"gmo_", "jfd_", "true_"})
    for (const char* c : {"fx", "fy", "fz", "mx", "my", "mz"}) h.push_back(std::string(p) + c);
  h.push_back("detected");
  CsvTable t(h);
  for (std::size_t k = 0; k < s.t.size(); ++k) {
    std::vector<double> row{s.t[k]};
    for (const auto* v : {&s.r[k], &s.kappa_jfd[k], &s.thresholds[k]})
      for (int i = 0; i < 6; ++i) row.push_back((*v)(i));
    for (const auto* w : {&s.w_gmo[k], &s.w_jfd[k], &s.w_true[k]}) {
      const Vec6 v = w->vec();
      for (int i = 0; i < 6; ++i) row.push_back(v(i));
    }
    row.push_back(s.detected[k].any ? 1.0 : 0.0);
    t.add(row);
  }
  return t;
}

/// Circular-ness beta_x, beta_y over a trajectory.
inline CsvTable beta_csv(const Trajectory& tr, double L) {
  CsvTable t({"t", "beta_x", "beta_y"});
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const auto [bx, by] = circularness(tr.c[k], L);
    t.add({tr.t[k], bx, by});
  }
  return t;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << j.dump(2) << "\n";
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace cgmo::scenarios
