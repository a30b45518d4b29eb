#include <cmath>

#include <gtest/gtest.h>

#include "cgmo/calibration.hpp"
#include "cgmo/params.hpp"

using namespace cgmo;

namespace {

ChirpExcitation short_chirp() {
  ChirpExcitation ex;
  ex.t_f = 1.5;
  ex.ramp = 0.5;
  ex.f_end = 1.0;
  return ex;
}

const Trajectory& short_record() {
  static const Trajectory rec = [] {
    IntegratorOptions opt;
    opt.rtol = 1e-8;
    opt.atol = 1e-10;
    return synthesize_calibration_data(distal_segment(), short_chirp(), opt);
  }();
  return rec;
}

}  // namespace

TEST(Interpolation, LinearAndClamped) {
  const std::vector<double> t{0.0, 1.0, 3.0};
  const std::vector<Vec2> v{Vec2(0, 0), Vec2(2, -2), Vec2(4, 0)};
  EXPECT_EQ(interpolate_series(t, v, -1.0), v[0]);
  EXPECT_EQ(interpolate_series(t, v, 5.0), v[2]);
  EXPECT_TRUE(interpolate_series(t, v, 0.25).isApprox(Vec2(0.5, -0.5)));
  EXPECT_TRUE(interpolate_series(t, v, 2.0).isApprox(Vec2(3, -1)));
  EXPECT_EQ(interpolate_series(t, v, 1.0), v[1]);
  EXPECT_THROW(interpolate_series(std::vector<double>{}, std::vector<Vec2>{}, 0.0), DomainError);
}

TEST(ChirpExcitation, FadesInFromRest) {
  const ChirpExcitation ex;
  EXPECT_EQ(ex.reference(0.0), 0.0);
  EXPECT_NEAR(ex.reference(2.0), chirp(2.0, ex.q_max, ex.f_start, ex.f_end, ex.t_f, ex.phi0), 1e-15);
  const double h = 1e-6;
  EXPECT_NEAR((ex.reference(h) - ex.reference(0.0)) / h, 0.0, 1e-4);
}

TEST(Objectives, VanishAtTheTrueParameters) {
  const SegmentParams truth = distal_segment();
  const Trajectory& rec = short_record();
  EXPECT_LT(acceleration_error_objective(truth, rec, truth.alpha()), 1e-18);
  IntegratorOptions opt;
  opt.rtol = 1e-8;
  opt.atol = 1e-10;
  const double f0 = calibration_objective(truth, rec, truth.alpha(), opt);
  EXPECT_LT(f0, 1e-8);
  Alpha off = truth.alpha();
  off(0) *= 1.2;
  EXPECT_GT(calibration_objective(truth, rec, off, opt), 100.0 * f0);
  EXPECT_GT(acceleration_error_objective(truth, rec, off), 1e-6);
}

TEST(Objectives, WindowedReplayRestartsFromRecord) {
  const SegmentParams truth = distal_segment();
  const Trajectory& rec = short_record();
  Alpha off = truth.alpha();
  off(1) *= 0.7;
  off(3) *= 0.5;
  IntegratorOptions opt;
  Trajectory sim;
  const double whole = calibration_objective(truth, rec, off, opt, 0.0, &sim);
  const double windowed = calibration_objective(truth, rec, off, opt, 0.25);
  EXPECT_EQ(sim.size(), rec.size());
  EXPECT_LT(windowed, whole);
}

TEST(NelderMead, MinimizesQuadraticInsideBox) {
  const Alpha target(0.3, 0.7, 0.15, 0.9);
  auto fn = [&](const Alpha& u) { return (u - target).squaredNorm(); };
  const auto out = detail::nelder_mead_box(fn, Alpha::Constant(0.5), 0.25, 2000, 0.0, 1e-9);
  EXPECT_LT((out.best - target).norm(), 1e-6);
  EXPECT_LE(out.evaluations, 2000);
}

TEST(NelderMead, RespectsBoundsWhenOptimumIsOutside) {
  auto fn = [](const Alpha& u) { return (u - Alpha(-1.0, 2.0, 0.5, 0.5)).squaredNorm(); };
  int calls = 0;
  auto counted = [&](const Alpha& u) {
    ++calls;
    EXPECT_TRUE((u.array() > 0.0).all() && (u.array() < 1.0).all()) << u.transpose();
    return fn(u);
  };
  const auto out = detail::nelder_mead_box(counted, Alpha::Constant(0.5), 0.25, 60, 0.0, 0.0);
  EXPECT_EQ(out.evaluations, calls);
  EXPECT_LE(calls, 60);
  EXPECT_LT(out.best(0), 0.2);
  EXPECT_GT(out.best(1), 0.8);
}

TEST(NelderMead, ReflectionStaysInside) {
  const Alpha r = detail::reflect_into_box(Alpha(-0.2, 1.3, 0.5, 7.0));
  EXPECT_NEAR(r(0), 0.2, 1e-15);
  EXPECT_NEAR(r(1), 0.7, 1e-15);
  EXPECT_EQ(r(2), 0.5);
  EXPECT_TRUE((r.array() > 0.0).all() && (r.array() < 1.0).all());
}

TEST(Calibration, ShortFitImprovesAndStaysInBounds) {
  CalibrationProblem prob;
  prob.base = distal_segment();
  prob.recorded = short_record();
  prob.seed_evaluations = 80;
  prob.max_evaluations = 8;
  prob.integrator = IntegratorOptions{1e-6, 1e-8, 100.0};
  int reports = 0;
  const CalibrationResult res = calibrate(prob, [&](const CalibrationResult&) { ++reports; });
  EXPECT_GT(reports, 0);
  EXPECT_LE(res.evaluations, 8);
  EXPECT_EQ(static_cast<int>(res.best_history.size()), res.evaluations);
  for (std::size_t i = 1; i < res.best_history.size(); ++i)
    EXPECT_LE(res.best_history[i], res.best_history[i - 1]);
  for (std::size_t i = 1; i < res.seed_history.size(); ++i)
    EXPECT_LE(res.seed_history[i], res.seed_history[i - 1]);
  for (const Alpha& a : res.evaluated)
    EXPECT_TRUE((a.array() > 0.0).all() && (a.array() < prob.alpha_max.array()).all());
  // the seed alone lands near the rigidities
  const Alpha truth = prob.base.alpha();
  EXPECT_LT(std::abs(res.alpha(0) - truth(0)) / truth(0), 0.1);
  EXPECT_LT(std::abs(res.alpha(1) - truth(1)) / truth(1), 0.1);
}

TEST(Calibration, ValidatesProblem) {
  CalibrationProblem prob;
  prob.base = distal_segment();
  EXPECT_THROW(calibrate(prob), ConfigError);  // empty record
  prob.recorded = short_record();
  prob.alpha0 = Alpha(3.0, 1.0, 0.5, 0.5);
  EXPECT_THROW(calibrate(prob), ConfigError);
  prob.alpha0.reset();
  prob.max_evaluations = 2;
  EXPECT_THROW(calibrate(prob), ConfigError);
  prob.max_evaluations = 200;
  prob.refine_step = 0.7;
  EXPECT_THROW(calibrate(prob), ConfigError);
}
