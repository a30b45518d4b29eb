#pragma once

// Fit [EI_x, EI_y, mu_1, mu_2] by replaying recorded capstan torques and
// matching the simulated modal coefficients to the recorded ones.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <vector>

#include "cgmo/dynamics.hpp"
#include "cgmo/errors.hpp"
#include "cgmo/params.hpp"
#include "cgmo/simulator.hpp"

namespace cgmo {

/// Piecewise-linear interpolation of a sampled series, clamped at the ends.
template <typename V>
V interpolate_series(const std::vector<double>& t, const std::vector<V>& v, double tq) {
  if (t.empty() || t.size() != v.size()) throw DomainError("bad series for interpolation");
  if (tq <= t.front()) return v.front();
  if (tq >= t.back()) return v.back();
  const auto it = std::upper_bound(t.begin(), t.end(), tq);
  const std::size_t k = static_cast<std::size_t>(it - t.begin());
  const double a = (tq - t[k - 1]) / (t[k] - t[k - 1]);
  return V((1.0 - a) * v[k - 1] + a * v[k]);
}

/// Open-loop replay of the recorded torques (linear between samples) from the
/// recorded initial state, sampled on the recording's rate.
inline Trajectory replay_torques(const SegmentModel& model, const Trajectory& rec,
                                 IntegratorOptions opt) {
  rec.validate();
  if (rec.size() < 2) throw ConfigError("recorded trajectory needs at least two samples");
  opt.sample_rate = 1.0 / rec.dt();
  auto tau = [&](double t, const SegmentState&) {
    return interpolate_series(rec.t, rec.tau, t);
  };
  return integrate(model, rec.state(0), tau, nullptr, rec.t.front(), rec.t.back(), opt);
}

struct CalibrationProblem {
  SegmentParams base;        // everything except alpha is taken from here
  Trajectory recorded;
  Alpha alpha_max = Alpha(2.5, 2.5, 1.0, 1.0);
  std::optional<Alpha> alpha0;  // default: midpoint of the box
  IntegratorOptions integrator{1e-5, 1e-7, 100.0};
  // >0: restart the replay from the recorded state every window (seconds),
  // which widens the basin around the optimum. 0 replays the whole record
  // in one shot.
  double shooting_window = 0.0;
  int max_evaluations = 200;
  double tolerance = 1e-6;   // on the spread of simplex objective values
  double initial_step = 0.25;  // simplex edge in box-normalized units
  // acceleration-error evaluations used to seed the replay fit; 0 starts the
  // replay fit directly from alpha0
  int seed_evaluations = 600;
  double refine_step = 0.01;  // simplex edge of the replay fit after seeding
  // simplex extent (box-normalized) at which the replay fit stops; the
  // objective spread alone cannot get below the integrator's noise floor
  double x_tolerance = 1e-4;

  void validate() const {
    base.validate();
    recorded.validate();
    if (recorded.size() < 2) throw ConfigError("recorded trajectory is empty");
    if (!(alpha_max.array() > 0.0).all() || !alpha_max.allFinite())
      throw ConfigError("alpha_max must be positive and finite");
    if (alpha0) {
      if (!((alpha0->array() > 0.0).all() && (alpha0->array() < alpha_max.array()).all()))
        throw ConfigError("alpha0 must lie strictly inside (0, alpha_max)");
    }
    if (!(shooting_window >= 0.0)) throw ConfigError("shooting_window must be >= 0");
    if (max_evaluations < 5) throw ConfigError("max_evaluations must be >= 5");
    if (!(tolerance >= 0.0)) throw ConfigError("tolerance must be >= 0");
    if (!(initial_step > 0.0 && initial_step < 0.5))
      throw ConfigError("initial_step must lie in (0, 0.5)");
    if (!(refine_step > 0.0 && refine_step < 0.5))
      throw ConfigError("refine_step must lie in (0, 0.5)");
    if (!(x_tolerance >= 0.0)) throw ConfigError("x_tolerance must be >= 0");
    if (seed_evaluations < 0) throw ConfigError("seed_evaluations must be >= 0");
    if (seed_evaluations > 0 && seed_evaluations < 5)
      throw ConfigError("seed_evaluations must be 0 or >= 5");
  }
};

struct CalibrationResult {
  Alpha alpha = Alpha::Zero();
  double objective = 0.0;             // best value of the optimized objective
  double full_replay_objective = 0.0;  // same fit scored by one uninterrupted replay
  int evaluations = 0;                // replay simulations
  int iterations = 0;
  int failed_evaluations = 0;
  std::vector<double> best_history;  // best-so-far replay objective after each evaluation
  Alpha seed_alpha = Alpha::Zero();
  int seed_evaluations = 0;
  std::vector<double> seed_history;  // best-so-far acceleration error
  std::vector<Alpha> evaluated;      // every alpha tried, both stages
  Vec3 rmse_tip_mm = Vec3::Zero();   // tip position error of the final fit per axis
  Vec6 rmse_c = Vec6::Zero();
  double seconds = 0.0;
};

/// 0.5 sum_i |c_i - c~_i(alpha)|^2 with the recording interpolated onto the
/// simulated sample times. With window > 0 the replay restarts from the
/// recorded state at the start of each window. Returns +inf if a simulation
/// fails.
inline double calibration_objective(const SegmentParams& base, const Trajectory& rec,
                                    const Alpha& alpha, const IntegratorOptions& opt,
                                    double window = 0.0, Trajectory* sim_out = nullptr) {
  SegmentParams p = base;
  p.set_alpha(alpha);
  try {
    const SegmentModel model(p);
    rec.validate();
    const double dt = rec.dt();
    const std::size_t n = rec.size();
    const std::size_t stride =
        window > 0.0 ? std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(window / dt)))
                     : n - 1;
    IntegratorOptions o = opt;
    o.sample_rate = 1.0 / dt;
    auto tau = [&](double t, const SegmentState&) { return interpolate_series(rec.t, rec.tau, t); };
    double f = 0.0;
    Trajectory all;
    for (std::size_t k0 = 0; k0 + 1 < n; k0 += stride) {
      const std::size_t k1 = std::min(n - 1, k0 + stride);
      Trajectory sim = integrate(model, rec.state(k0), tau, nullptr, rec.t[k0], rec.t[k1], o);
      // windows share their boundary sample; count it once
      const std::size_t first = k0 == 0 ? 0 : 1;
      for (std::size_t k = first; k < sim.size(); ++k) {
        const Vec6 d = sim.c[k] - interpolate_series(rec.t, rec.c, sim.t[k]);
        f += 0.5 * d.squaredNorm();
        if (sim_out) {
          all.t.push_back(sim.t[k]);
          all.c.push_back(sim.c[k]);
          all.cdot.push_back(sim.cdot[k]);
          all.cddot.push_back(sim.cddot[k]);
          all.tau.push_back(sim.tau[k]);
          all.w_true.push_back(sim.w_true[k]);
          all.s_c.push_back(sim.s_c[k]);
        }
      }
    }
    if (!std::isfinite(f)) return std::numeric_limits<double>::infinity();
    if (sim_out) *sim_out = std::move(all);
    return f;
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::infinity();
  }
}

/// Acceleration (equation) error 0.5 sum_i |cdd_i - fd(x_i, tau_i; alpha)|^2
/// on the recorded states. Needs no integration, and the rigidities enter
/// the residual linearly, so it has none of the output error's spurious
/// minima; used to seed the output-error fit.
inline double acceleration_error_objective(const SegmentParams& base, const Trajectory& rec,
                                           const Alpha& alpha) {
  SegmentParams p = base;
  p.set_alpha(alpha);
  try {
    const SegmentModel model(p);
    double f = 0.0;
    for (std::size_t k = 0; k < rec.size(); ++k) {
      const Vec6 d = rec.cddot[k] - model.forward_dynamics(rec.state(k), rec.tau[k], Wrench{}, p.L);
      f += 0.5 * d.squaredNorm();
    }
    return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::infinity();
  }
}

namespace detail {

/// Reflect a box-normalized point into (0, 1), keeping a margin so that every
/// evaluated alpha is strictly inside the bounds.
inline Alpha reflect_into_box(Alpha u) {
  constexpr double margin = 1e-9;
  for (int i = 0; i < 4; ++i) {
    double v = u(i);
    for (int guard = 0; guard < 8 && (v < 0.0 || v > 1.0); ++guard) {
      if (v < 0.0) v = -v;
      if (v > 1.0) v = 2.0 - v;
    }
    u(i) = std::clamp(v, margin, 1.0 - margin);
  }
  return u;
}

struct NelderMeadOutcome {
  Alpha best = Alpha::Zero();
  double f_best = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  int iterations = 0;
};

/// Nelder-Mead on the unit box with reflection at the faces. `fn` must
/// return a finite value. Stops on the evaluation budget, on an objective
/// spread <= ftol, or on a simplex extent <= xtol.
inline NelderMeadOutcome nelder_mead_box(const std::function<double(const Alpha&)>& fn,
                                         const Alpha& u0, double step, int max_evals,
                                         double ftol, double xtol) {
  NelderMeadOutcome out;
  auto eval = [&](const Alpha& u) {
    const double f = fn(u);
    ++out.evaluations;
    if (f < out.f_best) {
      out.f_best = f;
      out.best = u;
    }
    return f;
  };
  auto budget = [&] { return out.evaluations < max_evals; };

  std::array<Alpha, 5> x;
  std::array<double, 5> f;
  x[0] = reflect_into_box(u0);
  for (int i = 0; i < 4; ++i) {
    Alpha v = x[0];
    // step toward the roomier side
    v(i) += (x[0](i) <= 0.5 ? 1.0 : -1.0) * step;
    x[i + 1] = reflect_into_box(v);
  }
  for (int i = 0; i < 5; ++i) f[i] = budget() ? eval(x[i]) : std::numeric_limits<double>::infinity();

  while (budget()) {
    std::array<int, 5> idx;
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return f[a] < f[b]; });
    const int b = idx[0], w = idx[4], sw = idx[3];
    double size = 0.0;
    for (int i = 1; i < 5; ++i) size = std::max(size, (x[idx[i]] - x[b]).cwiseAbs().maxCoeff());
    if (f[w] - f[b] <= ftol || size <= xtol) break;
    ++out.iterations;

    Alpha centroid = Alpha::Zero();
    for (int i = 0; i < 4; ++i) centroid += x[idx[i]];
    centroid /= 4.0;

    const Alpha xr = reflect_into_box(centroid + (centroid - x[w]));
    const double fr = eval(xr);
    if (fr < f[b] && budget()) {
      const Alpha xe = reflect_into_box(centroid + 2.0 * (centroid - x[w]));
      const double fe = eval(xe);
      if (fe < fr) {
        x[w] = xe;
        f[w] = fe;
      } else {
        x[w] = xr;
        f[w] = fr;
      }
      continue;
    }
    if (fr < f[sw]) {
      x[w] = xr;
      f[w] = fr;
      continue;
    }
    if (!budget()) break;
    const bool outside = fr < f[w];
    const Alpha xc = outside ? Alpha(centroid + 0.5 * (xr - centroid))
                             : Alpha(centroid + 0.5 * (x[w] - centroid));
    const double fc = eval(xc);
    if (fc < (outside ? fr : f[w])) {
      x[w] = xc;
      f[w] = fc;
      continue;
    }
    // shrink toward the best vertex
    for (int i = 1; i < 5 && budget(); ++i) {
      const int j = idx[i];
      x[j] = x[b] + 0.5 * (x[j] - x[b]);
      f[j] = eval(x[j]);
    }
  }
  return out;
}

}  // namespace detail

/// Two-stage bounded fit. Stage one minimizes the acceleration error from
/// alpha0 (cheap, no integration); stage two minimizes the replay error from
/// there with at most `max_evaluations` simulations. Failed simulations are
/// scored with a large finite penalty so the simplex moves away from them.
inline CalibrationResult calibrate(const CalibrationProblem& prob,
                                   const std::function<void(const CalibrationResult&)>& progress = nullptr) {
  prob.validate();
  const auto start = std::chrono::steady_clock::now();
  constexpr double kPenalty = 1e12;

  CalibrationResult res;
  auto penalized = [&](double f) {
    if (std::isfinite(f)) return f;
    ++res.failed_evaluations;
    return kPenalty;
  };

  Alpha u = prob.alpha0 ? Alpha(prob.alpha0->cwiseQuotient(prob.alpha_max)) : Alpha::Constant(0.5);
  double step = prob.initial_step;

  if (prob.seed_evaluations > 0) {
    double best = std::numeric_limits<double>::infinity();
    auto fn = [&](const Alpha& v) {
      const Alpha a = v.cwiseProduct(prob.alpha_max);
      const double f = penalized(acceleration_error_objective(prob.base, prob.recorded, a));
      res.evaluated.push_back(a);
      best = std::min(best, f);
      res.seed_history.push_back(best);
      return f;
    };
    const auto nm = detail::nelder_mead_box(fn, u, step, prob.seed_evaluations, 0.0, 1e-10);
    res.seed_alpha = nm.best.cwiseProduct(prob.alpha_max);
    res.seed_evaluations = nm.evaluations;
    u = nm.best;
    step = prob.refine_step;
  }

  double best = std::numeric_limits<double>::infinity();
  auto fn = [&](const Alpha& v) {
    const Alpha a = v.cwiseProduct(prob.alpha_max);
    const double f = penalized(
        calibration_objective(prob.base, prob.recorded, a, prob.integrator, prob.shooting_window));
    res.evaluated.push_back(a);
    ++res.evaluations;
    if (f < best) {
      best = f;
      res.alpha = a;
    }
    res.best_history.push_back(best);
    if (progress) progress(res);
    return f;
  };
  const auto nm = detail::nelder_mead_box(fn, u, step, prob.max_evaluations, prob.tolerance,
                                          prob.x_tolerance);
  res.iterations = nm.iterations;

  // final fit report on a single full-length replay
  Trajectory sim;
  res.objective = best;
  const double full =
      calibration_objective(prob.base, prob.recorded, res.alpha, prob.integrator, 0.0, &sim);
  res.full_replay_objective = full;
  if (std::isfinite(full)) {
    SegmentParams p = prob.base;
    p.set_alpha(res.alpha);
    const ModalKinematics kin(p.L, p.n_sub);
    Vec3 se = Vec3::Zero();
    Vec6 sc = Vec6::Zero();
    for (std::size_t k = 0; k < sim.size(); ++k) {
      const Vec6 c_rec = interpolate_series(prob.recorded.t, prob.recorded.c, sim.t[k]);
      const Vec3 d = kin.pose(sim.c[k], p.L).p - kin.pose(c_rec, p.L).p;
      se += d.cwiseAbs2();
      sc += (sim.c[k] - c_rec).cwiseAbs2();
    }
    const double n = static_cast<double>(sim.size());
    res.rmse_tip_mm = (se / n).cwiseSqrt() * 1e3;
    res.rmse_c = (sc / n).cwiseSqrt();
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

// ---------------------------------------------------------------------------
// Synthetic calibration data

/// Chirp excitation tracked by a PD loop on both capstans. The reference is
/// faded in with a smoothstep so the segment starts from rest without a
/// torque spike.
struct ChirpExcitation {
  double q_max = 2.0 * std::numbers::pi;  // rad
  double f_start = 0.01;                  // Hz
  double f_end = 0.25;                    // Hz
  double t_f = 6.0;                       // s
  double phi0 = 0.5 * std::numbers::pi;   // rad
  double ramp = 1.0;                      // s
  double kp = 5.0;                        // N m / rad
  double kd = 0.3;                        // N m s / rad

  void validate() const {
    if (!(q_max > 0.0 && t_f > 0.0 && ramp >= 0.0 && kp >= 0.0 && kd >= 0.0))
      throw ConfigError("chirp excitation parameters out of range");
    if (!(f_start >= 0.0 && f_end >= 0.0)) throw ConfigError("chirp frequencies must be >= 0");
  }

  double reference(double t) const {
    double e = ramp > 0.0 ? std::clamp(t / ramp, 0.0, 1.0) : 1.0;
    e = e * e * (3.0 - 2.0 * e);
    return e * chirp(t, q_max, f_start, f_end, t_f, phi0);
  }
};

/// Torques come from the closed loop at the true parameters; the recorded
/// motion is then the open-loop replay of those sampled torques, so the
/// objective at the true alpha vanishes up to integrator tolerance.
inline Trajectory synthesize_calibration_data(const SegmentParams& truth, const ChirpExcitation& ex,
                                              const IntegratorOptions& opt) {
  ex.validate();
  const SegmentModel model(truth);
  const Eigen::Matrix<double, 2, 6> Jqc = model.capstan_jacobian_matrix();
  auto pd = [&](double t, const SegmentState& x) {
    const double qr = ex.reference(t);
    const Vec2 q = Jqc * x.c, qd = Jqc * x.cdot;
    return Vec2(ex.kp * (Vec2::Constant(qr) - q) - ex.kd * qd);
  };
  const Trajectory closed = integrate(model, SegmentState{}, pd, nullptr, 0.0, ex.t_f, opt);
  return replay_torques(model, closed, opt);
}

}  // namespace cgmo
