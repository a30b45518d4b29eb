#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cgmo/contact_estimation.hpp"
#include "cgmo/params.hpp"
#include "cgmo/simulator.hpp"

using namespace cgmo;

namespace {

Vec6 bent_shape() { return (Vec6() << 2.0, -0.5, 0.3, -1.5, 0.8, 0.1).finished(); }

Trajectory ramp_trajectory(const SegmentModel& model, double rate = 100.0) {
  auto contact = [](double t) {
    Wrench w;
    w.f << 4.0 * std::min(t / 0.3, 1.0), -2.0 * std::min(t / 0.3, 1.0), 0.0;
    return ContactInput{w, 0.25};
  };
  auto torque = [](double t, const SegmentState&) { return Vec2(0.2 * std::sin(3.0 * t), 0.1); };
  IntegratorOptions opt;
  opt.rtol = 1e-9;
  opt.atol = 1e-11;
  opt.sample_rate = rate;
  return integrate(model, SegmentState{}, torque, contact, 0.0, 0.5, opt);
}

}  // namespace

// ---------------------------------------------------------------------------
// Momentum observer

TEST(MomentumObserver, SilentAtRestWithoutLoads) {
  SegmentParams p = distal_segment();
  p.g.setZero();
  const SegmentModel model(p);
  MomentumObserver gmo(model, GmoConfig{});
  gmo.init(SegmentState{});
  for (int k = 0; k < 200; ++k) EXPECT_TRUE(gmo.step(SegmentState{}, Vec2::Zero()).isZero(1e-12));
}

TEST(MomentumObserver, FirstOrderStepResponse) {
  const SegmentModel model(distal_segment());
  GmoConfig cfg;
  cfg.gains << 4, 8, 12, 16, 20, 25;
  cfg.dt = 1e-3;
  MomentumObserver gmo(model, cfg);
  gmo.init(SegmentState{});
  // constant momentum with an unmodelled constant load F: beta = -F
  const Vec6 F = (Vec6() << 1.0, -2.0, 0.5, 3.0, -1.0, 0.25).finished();
  const MomentumBalance mb{generalized_momentum(model, SegmentState{}), -F};
  for (int k = 1; k <= 500; ++k) {
    const Vec6 r = gmo.step(mb);
    for (int i = 0; i < 6; ++i)
      EXPECT_NEAR(r(i), F(i) * (1.0 - std::pow(1.0 - cfg.gains(i) * cfg.dt, k)), 1e-12);
  }
}

TEST(MomentumObserver, WindowedSumMatchesDirectFormula) {
  const SegmentModel model(distal_segment());
  GmoConfig cfg;
  cfg.gains = Vec6::Constant(15.0);
  cfg.window = 7;
  cfg.dt = 0.01;
  MomentumObserver gmo(model, cfg);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Vec6> p{Vec6::Zero()}, beta{Vec6::Zero()}, r{Vec6::Zero()};
  gmo.init(SegmentState{});
  for (int k = 1; k <= 40; ++k) {
    Vec6 pk, bk;
    for (int i = 0; i < 6; ++i) {
      pk(i) = n(rng);
      bk(i) = n(rng);
    }
    p.push_back(pk);
    beta.push_back(bk);
    r.push_back(gmo.step(MomentumBalance{pk, bk}));
    const int k0 = std::max(0, k - cfg.window);
    Vec6 sum = Vec6::Zero();
    for (int j = k0 + 1; j <= k; ++j) {
      const Vec6 b = j == 1 ? beta[1] : Vec6(0.5 * (beta[j] + beta[j - 1]));  // no beta before init
      sum += (b + r[j - 1]) * cfg.dt;
    }
    const Vec6 ref = cfg.gains.cwiseProduct(p[k] - p[k0] - sum);
    EXPECT_LT((r[k] - ref).norm(), 1e-12) << "k = " << k;
  }
}

TEST(MomentumObserver, ResetsAfterHorizon) {
  const SegmentModel model(distal_segment());
  GmoConfig cfg;
  cfg.reset_horizon = 5;
  MomentumObserver gmo(model, cfg);
  gmo.init(SegmentState{});
  const MomentumBalance mb{Vec6::Zero(), -Vec6::Ones()};
  for (int k = 0; k < 5; ++k) EXPECT_GT(gmo.step(mb).norm(), 0.0);
  EXPECT_EQ(gmo.state().k, 5);
  EXPECT_TRUE(gmo.step(mb).isZero(0.0));
  EXPECT_EQ(gmo.state().k, 0);
  EXPECT_GT(gmo.step(mb).norm(), 0.0);
}

TEST(MomentumObserver, ValidatesConfigAndUse) {
  const SegmentModel model(distal_segment());
  GmoConfig bad;
  bad.dt = 0.0;
  EXPECT_THROW(MomentumObserver(model, bad), ConfigError);
  bad = GmoConfig{};
  bad.window = 10;
  bad.reset_horizon = 5;
  EXPECT_THROW(MomentumObserver(model, bad), ConfigError);
  MomentumObserver gmo(model, GmoConfig{});
  EXPECT_THROW(gmo.step(SegmentState{}, Vec2::Zero()), std::logic_error);
}

TEST(MomentumObserver, ConvergesToContactForceOnSimulatedMotion) {
  const SegmentModel model(distal_segment());
  const Trajectory tr = ramp_trajectory(model, 1000.0);
  GmoConfig cfg;
  cfg.gains = Vec6::Constant(50.0);
  cfg.dt = tr.dt();
  cfg.reset_horizon = 100000;
  MomentumObserver gmo(model, cfg);
  gmo.init(tr.state(0));
  Vec6 r = Vec6::Zero();
  for (std::size_t k = 1; k < tr.size(); ++k) r = gmo.step(tr.state(k), tr.tau[k]);
  const Vec6 ref = model.contact_jacobian(tr.c.back(), 0.25).transpose() * tr.w_true.back().vec();
  EXPECT_LT((r - ref).norm(), 0.02 * ref.norm());
}

// ---------------------------------------------------------------------------
// Joint force deviation

TEST(Jfd, ExactAccelerationsRecoverContactForce) {
  const SegmentModel model(distal_segment());
  const Trajectory tr = ramp_trajectory(model);
  for (std::size_t k = 0; k < tr.size(); k += 7) {
    const Vec6 ref = model.contact_jacobian(tr.c[k], 0.25).transpose() * tr.w_true[k].vec();
    const Vec6 got = jfd(model, tr.state(k), tr.cddot[k], tr.tau[k]);
    EXPECT_LT((got - ref).norm(), 1e-9 * std::max(1.0, ref.norm()));
  }
}

// ---------------------------------------------------------------------------
// Wrench estimation

TEST(WrenchEstimation, PointContactRecoversForce) {
  const SegmentModel model(distal_segment());
  for (const Vec6& c : {Vec6::Zero().eval(), bent_shape()}) {
    for (double s : {0.12, 0.25, model.length()}) {
      Wrench w;
      w.f << 3.0, -7.0, 0.0;
      const Vec6 r = model.contact_jacobian(c, s).transpose() * w.vec();
      WrenchEstimationProblem prob;
      prob.s_c = s;
      const Wrench est = estimate_wrench(model, r, prob, c);
      EXPECT_NEAR(est.f(0), 3.0, 1e-8) << "s = " << s;
      EXPECT_NEAR(est.f(1), -7.0, 1e-8);
      EXPECT_NEAR(est.f(2), 0.0, 1e-10);
      EXPECT_TRUE(est.m.isZero(1e-10));
    }
  }
}

TEST(WrenchEstimation, UnconstrainedIsMinimumNormSolution) {
  const SegmentModel model(distal_segment());
  const Mat6 J = model.contact_jacobian(bent_shape(), 0.2);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  Vec6 r;
  for (int i = 0; i < 6; ++i) r(i) = n(rng);
  WrenchEstimationProblem prob;
  prob.A.resize(0, 6);
  prob.W << 1, 2, 3, 0.5, 1, 4;
  // oracle: w = W^-1/2 pinv(J^T W^-1/2) r
  const Vec6 s = prob.W.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd B = J.transpose() * s.asDiagonal();
  const Vec6 ref = s.asDiagonal() * (B.completeOrthogonalDecomposition().pseudoInverse() * r);
  // cond(J) is in the thousands here, so agreement is limited to ~cond^2 eps
  EXPECT_LT((estimate_wrench(r, prob, J).vec() - ref).norm(), 1e-7 * ref.norm());
}

TEST(WrenchEstimation, LinearInResidualAndHonoursConstraints) {
  const SegmentModel model(distal_segment());
  const Mat6 J = model.contact_jacobian(bent_shape(), model.length());
  const Vec6 r = (Vec6() << 0.4, -1.0, 2.0, 0.3, 0.0, -0.7).finished();
  WrenchEstimationProblem prob;
  const Vec6 w1 = estimate_wrench(r, prob, J).vec();
  const Vec6 w3 = estimate_wrench(-3.0 * r, prob, J).vec();
  EXPECT_LT((w3 + 3.0 * w1).norm(), 1e-10 * w1.norm());
  EXPECT_LT((prob.A * w1).norm(), 1e-12);
  EXPECT_TRUE(estimate_wrench(Vec6::Zero(), prob, J).vec().isZero(0.0));
}

TEST(WrenchEstimation, RejectsBadInput) {
  const Mat6 J = Mat6::Identity();
  WrenchEstimationProblem prob;
  Vec6 r = Vec6::Ones();
  r(3) = std::nan("");
  EXPECT_THROW(estimate_wrench(r, prob, J), DomainError);
  prob.W(0) = 0.0;
  EXPECT_THROW(estimate_wrench(Vec6::Ones(), prob, J), ConfigError);
}

// ---------------------------------------------------------------------------
// Residual sensitivity and thresholds

TEST(ResidualSensitivity, MatchesEndToEndFiniteDifferences) {
  const SegmentModel model(distal_segment());
  const Trajectory tr = ramp_trajectory(model);
  GmoConfig cfg;
  cfg.gains = Vec6::Constant(10.0);
  cfg.dt = tr.dt();
  const std::size_t n = 30;

  ResidualSensitivity sens(model, cfg);
  sens.init();
  Mat612 D = Mat612::Zero();
  for (std::size_t k = 1; k <= n; ++k) D = sens.step(tr.state(k), tr.tau[k]);

  auto run = [&](const Vec12d& dx) {
    MomentumObserver gmo(model, cfg);
    gmo.init(tr.state(0));  // latched from the unperturbed start
    Vec6 r = Vec6::Zero();
    for (std::size_t k = 1; k <= n; ++k) {
      SegmentState x = tr.state(k);
      x.c += dx.head<6>();
      x.cdot += dx.tail<6>();
      r = gmo.step(x, tr.tau[k]);
    }
    return r;
  };
  const double h = 1e-5;
  Mat612 fd;
  for (int j = 0; j < 12; ++j) {
    Vec12d dx = Vec12d::Zero();
    dx(j) = h;
    fd.col(j) = (run(dx) - run(-dx)) / (2.0 * h);
  }
  EXPECT_LT((D - fd).norm(), 0.05 * fd.norm());
}

TEST(ResidualSensitivity, IndependentOfTorqueWithoutFriction) {
  SegmentParams p = distal_segment();
  p.mu1 = p.mu2 = 0.0;
  const SegmentModel model(p);
  ResidualSensitivity sens(model, GmoConfig{});
  SegmentState x{bent_shape(), Vec6::Constant(0.3)};
  const auto a = sens.partials(x, Vec2(0.0, 0.0));
  const auto b = sens.partials(x, Vec2(2.0, -1.5));
  EXPECT_LT((a.dbeta - b.dbeta).norm(), 1e-6 * a.dbeta.norm());
  EXPECT_EQ(a.dp, b.dp);
}

TEST(Detection, ThresholdIsAbsoluteRowSum) {
  Mat612 D = Mat612::Zero();
  D(0, 0) = 2.0;
  D(0, 7) = -3.0;
  D(4, 11) = -1.0;
  Vec12d dx = Vec12d::Constant(0.1);
  dx(7) = 0.5;
  const Vec6 thr = detection_thresholds(D, dx);
  EXPECT_NEAR(thr(0), 0.2 + 1.5, 1e-15);
  EXPECT_NEAR(thr(4), 0.1, 1e-15);
  EXPECT_EQ(thr(1), 0.0);
  dx(0) = -1.0;
  EXPECT_THROW(detection_thresholds(D, dx), DomainError);
}

TEST(Detection, StrictlyAboveThreshold) {
  const Vec6 thr = Vec6::Constant(1.0);
  Vec6 r = Vec6::Zero();
  r(2) = 1.0;
  EXPECT_FALSE(detect(r, thr).any);
  r(2) = -1.0000001;
  const Detection d = detect(r, thr);
  EXPECT_TRUE(d.any);
  EXPECT_TRUE(d.element[2]);
  EXPECT_FALSE(d.element[0]);
}
