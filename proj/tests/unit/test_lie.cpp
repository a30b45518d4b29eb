#include <random>

#include <gtest/gtest.h>

#include "cgmo/lie.hpp"

using namespace cgmo;

namespace {

Mat4 expm_series(const Mat4& A) {
  // scaling and squaring on a long Taylor series; plenty for |A| ~ 1
  const int sq = 8;
  const Mat4 B = A / std::pow(2.0, sq);
  Mat4 term = Mat4::Identity(), sum = Mat4::Identity();
  for (int k = 1; k < 30; ++k) {
    term = term * B / k;
    sum += term;
  }
  for (int i = 0; i < sq; ++i) sum = sum * sum;
  return sum;
}

Vec6 random_twist(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vec6 x;
  for (int i = 0; i < 6; ++i) x(i) = u(rng);
  return x;
}

}  // namespace

TEST(Lie, HatVeeRoundTrip) {
  const Vec3 w(0.3, -1.2, 2.5);
  EXPECT_EQ(vee(hat(w)), w);
  EXPECT_TRUE((hat(w) + hat(w).transpose()).isZero(0.0));
  const Vec6 xi = (Vec6() << 1, 2, 3, 4, 5, 6).finished();
  EXPECT_EQ(vee6(hat6(xi)), xi);
}

TEST(Lie, Se3ExpMatchesMatrixExponential) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    const Vec6 xi = random_twist(rng, 1.5);
    const Mat4 ref = expm_series(hat6(xi));
    EXPECT_LT((se3_exp(xi).matrix() - ref).norm(), 1e-12) << xi.transpose();
  }
}

TEST(Lie, Se3ExpSmallAngleBranch) {
  Vec6 xi;
  xi << 0.1, -0.2, 0.3, 1e-5, -2e-5, 3e-5;
  EXPECT_LT((se3_exp(xi).matrix() - expm_series(hat6(xi))).norm(), 1e-13);
  EXPECT_TRUE(se3_exp(Vec6::Zero()).matrix().isIdentity(0.0));
}

TEST(Lie, AdjointConjugatesTwists) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const Pose T = se3_exp(random_twist(rng, 1.0));
    const Vec6 xi = random_twist(rng, 1.0);
    const Mat4 lhs = T.matrix() * hat6(xi) * T.inverse().matrix();
    EXPECT_LT((lhs - hat6(adjoint(T) * xi)).norm(), 1e-12);
  }
}

TEST(Lie, SmallAdjointIsLieBracket) {
  std::mt19937_64 rng(3);
  const Vec6 a = random_twist(rng, 1.0), b = random_twist(rng, 1.0);
  const Mat4 bracket = hat6(a) * hat6(b) - hat6(b) * hat6(a);
  EXPECT_LT((hat6(ad(a) * b) - bracket).norm(), 1e-13);
}

TEST(Lie, PoseInverseAndComposition) {
  std::mt19937_64 rng(5);
  const Pose A = se3_exp(random_twist(rng, 1.0)), B = se3_exp(random_twist(rng, 1.0));
  EXPECT_TRUE((A * A.inverse()).matrix().isIdentity(1e-13));
  EXPECT_LT(((A * B).matrix() - A.matrix() * B.matrix()).norm(), 1e-13);
  EXPECT_LT((Pose::from_matrix(A.matrix()).matrix() - A.matrix()).norm(), 0.0 + 1e-15);
}

// exp(xi + d) ~ exp(xi) exp(Jr d): the right Jacobian against central differences
TEST(Lie, RightJacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 10; ++i) {
    const Vec6 xi = random_twist(rng, 1.2);
    const Mat4 Einv = se3_exp(xi).inverse().matrix();
    const Mat6 Jr = se3_right_jacobian(xi);
    const double h = 1e-6;
    for (int j = 0; j < 6; ++j) {
      Vec6 d = Vec6::Zero();
      d(j) = h;
      const Mat4 D = Einv * (se3_exp(xi + d).matrix() - se3_exp(xi - d).matrix()) / (2.0 * h);
      EXPECT_LT((vee6(D) - Jr.col(j)).norm(), 1e-8);
    }
  }
}

TEST(Lie, LeftJacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  const Vec6 xi = random_twist(rng, 1.2);
  const Mat4 Einv = se3_exp(xi).inverse().matrix();
  const Mat6 Jl = se3_left_jacobian(xi);
  const double h = 1e-6;
  for (int j = 0; j < 6; ++j) {
    Vec6 d = Vec6::Zero();
    d(j) = h;
    const Mat4 D = (se3_exp(xi + d).matrix() - se3_exp(xi - d).matrix()) / (2.0 * h) * Einv;
    EXPECT_LT((vee6(D) - Jl.col(j)).norm(), 1e-8);
  }
}
