#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "cgmo/params.hpp"
#include "cgmo/simulator.hpp"

using namespace cgmo;

namespace {

Trajectory sample_trajectory() {
  const SegmentModel model(distal_segment());
  auto contact = [&](double t) {
    Wrench w;
    w.f << 5.0 * std::min(t, 1.0), -3.0, 0.0;
    return ContactInput{w, 0.2};
  };
  auto torque = [](double t, const SegmentState&) { return Vec2(0.3 * t, -0.1); };
  IntegratorOptions opt;
  opt.sample_rate = 50.0;
  return integrate(model, SegmentState{}, torque, contact, 0.0, 0.6, opt);
}

}  // namespace

TEST(Dopri5, ExponentialDecayAndOutputGrid) {
  IntegratorOptions opt;
  opt.rtol = 1e-10;
  opt.atol = 1e-12;
  opt.sample_rate = 10.0;
  std::vector<double> ts, ys;
  Eigen::Matrix<double, 1, 1> y0;
  y0 << 1.0;
  dopri5<1>([](double, const Eigen::Matrix<double, 1, 1>& y) { return Eigen::Matrix<double, 1, 1>(-2.0 * y); },
            0.0, 1.0, y0, opt, [&](double t, const Eigen::Matrix<double, 1, 1>& y) {
              ts.push_back(t);
              ys.push_back(y(0));
            });
  ASSERT_EQ(ts.size(), 11u);
  for (std::size_t k = 0; k < ts.size(); ++k) {
    EXPECT_NEAR(ts[k], 0.1 * k, 1e-12);
    EXPECT_NEAR(ys[k], std::exp(-2.0 * ts[k]), 1e-9);
  }
}

TEST(Dopri5, RejectsBadOptions) {
  Eigen::Matrix<double, 1, 1> y0 = Eigen::Matrix<double, 1, 1>::Zero();
  auto f = [](double, const Eigen::Matrix<double, 1, 1>& y) { return y; };
  auto obs = [](double, const Eigen::Matrix<double, 1, 1>&) {};
  IntegratorOptions bad;
  bad.rtol = 0.0;
  EXPECT_THROW(dopri5<1>(f, 0.0, 1.0, y0, bad, obs), DomainError);
  EXPECT_THROW(dopri5<1>(f, 1.0, 0.0, y0, IntegratorOptions{}, obs), DomainError);
}

TEST(Integrate, RecordsInputsAndConsistentAccelerations) {
  const Trajectory tr = sample_trajectory();
  ASSERT_EQ(tr.size(), 31u);
  EXPECT_NO_THROW(tr.validate());
  EXPECT_NEAR(tr.dt(), 0.02, 1e-12);
  const SegmentModel model(distal_segment());
  for (std::size_t k = 0; k < tr.size(); k += 10) {
    EXPECT_NEAR(tr.tau[k](0), 0.3 * tr.t[k], 1e-12);
    EXPECT_EQ(tr.s_c[k], 0.2);
    const Vec6 cdd = model.forward_dynamics(tr.state(k), tr.tau[k], tr.w_true[k], tr.s_c[k]);
    EXPECT_LT((cdd - tr.cddot[k]).norm(), 1e-12 * std::max(1.0, cdd.norm()));
  }
}

TEST(Integrate, RatesAreDerivativeOfSampledShape) {
  const SegmentModel model(distal_segment());
  IntegratorOptions opt;
  opt.rtol = 1e-9;
  opt.atol = 1e-11;
  opt.sample_rate = 4000.0;
  auto torque = [](double, const SegmentState&) { return Vec2(0.5, -0.2); };
  const Trajectory tr = integrate(model, SegmentState{}, torque, nullptr, 0.0, 0.1, opt);
  for (std::size_t k = 1; k + 1 < tr.size(); ++k) {
    const Vec6 fd = (tr.c[k + 1] - tr.c[k - 1]) / (2.0 * tr.dt());
    EXPECT_LT((fd - tr.cdot[k]).norm(), 0.01 * std::max(1.0, tr.cdot[k].norm()));
  }
}

TEST(Integrate, Deterministic) {
  const Trajectory a = sample_trajectory(), b = sample_trajectory();
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a.c[k], b.c[k]);
}

TEST(Chirp, FrequencyEndpointsAndPhase) {
  EXPECT_NEAR(chirp_frequency(0.0, 0.01, 0.25, 6.0), 0.01, 1e-15);
  EXPECT_NEAR(chirp_frequency(6.0, 0.01, 0.25, 6.0), 0.25, 1e-15);
  EXPECT_NEAR(chirp(0.0, 2.0, 0.01, 0.25, 6.0, 0.5 * std::numbers::pi), 2.0, 1e-15);
  // d/dt sin(phase) = 2 pi f(t) cos(phase)
  const double t = 3.7, h = 1e-6;
  const double w = 2.0 * std::numbers::pi * chirp_frequency(t, 0.01, 0.25, 6.0);
  const double d = (chirp(t + h, 1.0, 0.01, 0.25, 6.0, 0.0) - chirp(t - h, 1.0, 0.01, 0.25, 6.0, 0.0)) / (2 * h);
  const double ph = 2.0 * std::numbers::pi * ((0.25 - 0.01) / 12.0 * t * t + 0.01 * t);
  EXPECT_NEAR(d, w * std::cos(ph), 1e-6);
  EXPECT_THROW(chirp(1.0, 1.0, 0.0, 1.0, 0.0, 0.0), DomainError);
}

TEST(Noise, UniformWithinBoundsAndSeeded) {
  const Trajectory tr = sample_trajectory();
  const double A = 0.01;
  const Trajectory n1 = add_noise(tr, {A, 42, NoiseKind::Uniform});
  const Trajectory n2 = add_noise(tr, {A, 42, NoiseKind::Uniform});
  const Trajectory n3 = add_noise(tr, {A, 43, NoiseKind::Uniform});
  double lo = 0.0, hi = 0.0;
  bool differs = false;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const Vec6 e = n1.c[k] - tr.c[k];
    lo = std::min(lo, e.minCoeff());
    hi = std::max(hi, e.maxCoeff());
    EXPECT_EQ(n1.c[k], n2.c[k]);
    differs = differs || n1.c[k] != n3.c[k];
    EXPECT_EQ(n1.cdot[k], tr.cdot[k]);  // only c is perturbed
  }
  EXPECT_TRUE(differs);
  EXPECT_GE(lo, -0.5 * A);
  EXPECT_LE(hi, 0.5 * A);
  EXPECT_GT(hi - lo, 0.9 * A);
  EXPECT_THROW(add_noise(tr, {-1.0, 0}), DomainError);
}

TEST(Noise, GaussianSpread) {
  Trajectory tr;
  for (int k = 0; k < 5000; ++k) {
    tr.t.push_back(k * 0.01);
    tr.c.push_back(Vec6::Zero());
  }
  const Trajectory n = add_noise(tr, {0.06, 1, NoiseKind::Gaussian});
  double s2 = 0.0;
  for (const auto& c : n.c) s2 += c.squaredNorm();
  EXPECT_NEAR(std::sqrt(s2 / (6.0 * 5000)), 0.01, 0.0005);
}

TEST(Smoothing, IsCausal) {
  std::vector<double> x(50);
  for (int k = 0; k < 50; ++k) x[k] = std::sin(0.3 * k);
  std::vector<double> y = x;
  for (int k = 30; k < 50; ++k) y[k] += 100.0;
  const auto sx = causal_gaussian_smooth(x, 10), sy = causal_gaussian_smooth(y, 10);
  for (int k = 0; k < 30; ++k) EXPECT_EQ(sx[k], sy[k]);
  const auto dx = smoothed_derivative(x, 10, 0.01), dy = smoothed_derivative(y, 10, 0.01);
  for (int k = 0; k < 30; ++k) EXPECT_EQ(dx[k], dy[k]);
}

TEST(Smoothing, PreservesConstantsAndRampSlopes) {
  std::vector<double> c(40, 3.5), r(40);
  for (int k = 0; k < 40; ++k) r[k] = 2.0 * k * 0.01;
  for (double v : causal_gaussian_smooth(c, 10)) EXPECT_NEAR(v, 3.5, 1e-14);
  const auto d = smoothed_derivative(r, 10, 0.01);
  EXPECT_EQ(d[0], 0.0);
  for (int k = 10; k < 40; ++k) EXPECT_NEAR(d[k], 2.0, 1e-10);
}

TEST(Smoothing, RejectsShortSeries) {
  EXPECT_THROW(causal_gaussian_smooth(std::vector<double>(5, 1.0), 10), DomainError);
  EXPECT_THROW(causal_gaussian_smooth(std::vector<double>(5, 1.0), 0), DomainError);
  EXPECT_THROW(smoothed_derivative(std::vector<double>(20, 1.0), 3, 0.0), DomainError);
}

TEST(TrajectoryCsv, RoundTripIsBitExact) {
  const Trajectory tr = sample_trajectory();
  std::stringstream ss;
  write_trajectory_csv(ss, tr);
  const Trajectory back = read_trajectory_csv(ss);
  ASSERT_EQ(back.size(), tr.size());
  for (std::size_t k = 0; k < tr.size(); ++k) {
    EXPECT_EQ(back.t[k], tr.t[k]);
    EXPECT_EQ(back.c[k], tr.c[k]);
    EXPECT_EQ(back.cdot[k], tr.cdot[k]);
    EXPECT_EQ(back.cddot[k], tr.cddot[k]);
    EXPECT_EQ(back.tau[k], tr.tau[k]);
    EXPECT_EQ(back.w_true[k].vec(), tr.w_true[k].vec());
    EXPECT_EQ(back.s_c[k], tr.s_c[k]);
  }
}

TEST(TrajectoryCsv, ReportsMalformedInput) {
  std::stringstream bad_header("t,c1\n0,1\n");
  EXPECT_THROW(read_trajectory_csv(bad_header), ConfigError);
  const Trajectory tr = sample_trajectory();
  std::stringstream ss;
  write_trajectory_csv(ss, tr);
  std::string text = ss.str();
  text.replace(text.find('\n') + 1, 1, "x");
  std::stringstream broken(text);
  try {
    read_trajectory_csv(broken, "traj.csv");
    FAIL() << "expected an error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("traj.csv:2"), std::string::npos) << e.what();
  }
}
