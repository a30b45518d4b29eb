#pragma once

// SE(3) / so(3) helpers with twists ordered as [v; w] (translation first).

#include <array>
#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace cgmo {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Rigid transform {R, p}. Value type; composition is `a * b`.
struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 p = Vec3::Zero();

  static Pose identity() { return {}; }

  Pose operator*(const Pose& o) const { return {R * o.R, R * o.p + p}; }

  Pose inverse() const {
    Mat3 Rt = R.transpose();
    return {Rt, -(Rt * p)};
  }

  Mat4 matrix() const {
    Mat4 T = Mat4::Identity();
    T.topLeftCorner<3, 3>() = R;
    T.topRightCorner<3, 1>() = p;
    return T;
  }

  static Pose from_matrix(const Mat4& T) {
    return {T.topLeftCorner<3, 3>(), T.topRightCorner<3, 1>()};
  }
};

inline Mat3 hat(const Vec3& x) {
  Mat3 m;
  m << 0.0, -x.z(), x.y(),
       x.z(), 0.0, -x.x(),
       -x.y(), x.x(), 0.0;
  return m;
}

inline Vec3 vee(const Mat3& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

/// 4x4 se(3) matrix of the twist xi = [v; w].
inline Mat4 hat6(const Vec6& xi) {
  Mat4 m = Mat4::Zero();
  m.topLeftCorner<3, 3>() = hat(xi.tail<3>());
  m.topRightCorner<3, 1>() = xi.head<3>();
  return m;
}

inline Vec6 vee6(const Mat4& m) {
  Vec6 xi;
  xi.head<3>() = m.topRightCorner<3, 1>();
  xi.tail<3>() = vee(m.topLeftCorner<3, 3>());
  return xi;
}

/// Adjoint of a pose acting on [v; w] twists.
inline Mat6 adjoint(const Pose& T) {
  Mat6 A = Mat6::Zero();
  A.topLeftCorner<3, 3>() = T.R;
  A.topRightCorner<3, 3>() = hat(T.p) * T.R;
  A.bottomRightCorner<3, 3>() = T.R;
  return A;
}

/// Small adjoint: ad(a) * b == [a^, b^] as twists.
inline Mat6 ad(const Vec6& xi) {
  Mat6 A = Mat6::Zero();
  const Mat3 w = hat(xi.tail<3>());
  A.topLeftCorner<3, 3>() = w;
  A.topRightCorner<3, 3>() = hat(xi.head<3>());
  A.bottomRightCorner<3, 3>() = w;
  return A;
}

namespace detail {

// Series coefficients of the SO(3)/SE(3) exponential and its Jacobians.
// Below theta = 2 they come from their alternating series: the closed forms
// of c, d and e cancel catastrophically for small theta (d loses about 12
// digits at theta^2 = 1e-6).
struct ExpCoeffs {
  double a;  // sin(t)/t
  double b;  // (1 - cos t)/t^2
  double c;  // (t - sin t)/t^3
  double d;  // (t^2 + 2 cos t - 2)/(2 t^4)
  double e;  // (2t - 3 sin t + t cos t)/(2 t^5)
};

inline ExpCoeffs exp_coeffs(double theta2) {
  ExpCoeffs k{};
  if (theta2 < 4.0) {
    // a = sum (-1)^m t^2m / (2m+1)!, b, c, d shift the factorial by 1, 2, 3;
    // e = sum (-1)^m (m+1) t^2m / (2m+5)!
    constexpr int kTerms = 14;
    static const auto inv_fact = [] {
      std::array<double, 2 * kTerms + 6> f{};
      f[0] = 1.0;
      for (std::size_t n = 1; n < f.size(); ++n) f[n] = f[n - 1] / static_cast<double>(n);
      return f;
    }();
    double pw = 1.0;
    for (int m = 0; m < kTerms; ++m) {
      const double sgn_pw = (m % 2 == 0 ? 1.0 : -1.0) * pw;
      k.a += sgn_pw * inv_fact[2 * m + 1];
      k.b += sgn_pw * inv_fact[2 * m + 2];
      k.c += sgn_pw * inv_fact[2 * m + 3];
      k.d += sgn_pw * inv_fact[2 * m + 4];
      k.e += sgn_pw * (m + 1) * inv_fact[2 * m + 5];
      pw *= theta2;
    }
    return k;
  }
  const double t = std::sqrt(theta2);
  const double s = std::sin(t), co = std::cos(t);
  k.a = s / t;
  k.b = (1.0 - co) / theta2;
  k.c = (t - s) / (theta2 * t);
  k.d = (theta2 + 2.0 * co - 2.0) / (2.0 * theta2 * theta2);
  k.e = (2.0 * t - 3.0 * s + t * co) / (2.0 * theta2 * theta2 * t);
  return k;
}

}  // namespace detail

inline Mat3 so3_exp(const Vec3& w) {
  const auto k = detail::exp_coeffs(w.squaredNorm());
  const Mat3 W = hat(w);
  return Mat3::Identity() + k.a * W + k.b * W * W;
}

/// Left Jacobian of SO(3).
inline Mat3 so3_left_jacobian(const Vec3& w) {
  const auto k = detail::exp_coeffs(w.squaredNorm());
  const Mat3 W = hat(w);
  return Mat3::Identity() + k.b * W + k.c * W * W;
}

inline Pose se3_exp(const Vec6& xi) {
  const Vec3 rho = xi.head<3>();
  const Vec3 phi = xi.tail<3>();
  const auto k = detail::exp_coeffs(phi.squaredNorm());
  const Mat3 W = hat(phi);
  const Mat3 W2 = W * W;
  Pose T;
  T.R = Mat3::Identity() + k.a * W + k.b * W2;
  T.p = (Mat3::Identity() + k.b * W + k.c * W2) * rho;
  return T;
}

/// Left Jacobian of SE(3): exp((xi + d)^) ~= exp((Jl d)^) exp(xi^).
inline Mat6 se3_left_jacobian(const Vec6& xi) {
  const Vec3 rho = xi.head<3>();
  const Vec3 phi = xi.tail<3>();
  const auto k = detail::exp_coeffs(phi.squaredNorm());
  const Mat3 P = hat(phi);
  const Mat3 Rh = hat(rho);
  const Mat3 P2 = P * P;
  const Mat3 PR = P * Rh;
  const Mat3 RP = Rh * P;
  const Mat3 PRP = PR * P;
  const Mat3 Q = 0.5 * Rh + k.c * (PR + RP + PRP) +
                 k.d * (P * PR + RP * P - 3.0 * PRP) +
                 k.e * (PRP * P + P * PRP);
  const Mat3 Jso3 = Mat3::Identity() + k.b * P + k.c * P2;
  Mat6 J = Mat6::Zero();
  J.topLeftCorner<3, 3>() = Jso3;
  J.topRightCorner<3, 3>() = Q;
  J.bottomRightCorner<3, 3>() = Jso3;
  return J;
}

/// Right Jacobian of SE(3): exp(xi^)^{-1} d exp(xi^) = (Jr dxi)^.
inline Mat6 se3_right_jacobian(const Vec6& xi) { return se3_left_jacobian(-xi); }

}  // namespace cgmo
