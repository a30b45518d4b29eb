#pragma once

// Shape representation of a torsion-free, inextensible continuum segment.
//
// The curvature along the backbone is u(s) = Phi(s) c with three Chebyshev
// terms per bending axis, c = [c_x; c_y]. Frames follow T'(s) = T(s) eta^(s),
// eta = [e3; u(s)], integrated with the fourth-order Magnus expansion on a
// uniform grid of n_sub steps over [0, L]. Arclengths between grid knots are
// reached with one partial Magnus step from the preceding knot, so the frame
// at a given s does not depend on which other stations are queried.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "cgmo/errors.hpp"
#include "cgmo/lie.hpp"

namespace cgmo {

inline constexpr int kModes = 6;

/// Chebyshev curvature weights: [c_x0, c_x1, c_x2, c_y0, c_y1, c_y2] (1/m).
using ModalCoefficients = Vec6;
using Mat36 = Eigen::Matrix<double, 3, 6>;

inline bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  return m.allFinite();
}

inline void require_finite(const ModalCoefficients& c, const char* what = "modal coefficients") {
  if (!c.allFinite()) throw DomainError(std::string(what) + " contain NaN or Inf");
}

namespace detail {
inline void check_arclength(double s, double L) {
  if (!(L > 0.0)) throw DomainError("segment length must be positive");
  const double slack = 1e-12 * L;
  if (!(s >= -slack && s <= L + slack))
    throw DomainError("arclength " + std::to_string(s) + " outside [0, " + std::to_string(L) + "]");
}
}  // namespace detail

/// First three Chebyshev polynomials on [0, L]: [1, x, 2x^2 - 1], x = (2s - L)/L.
inline Vec3 chebyshev_basis(double s, double L) {
  detail::check_arclength(s, L);
  const double x = (2.0 * s - L) / L;
  return {1.0, x, 2.0 * x * x - 1.0};
}

/// Phi(s): row 0 = [phi^T, 0], row 1 = [0, phi^T], row 2 = 0.
inline Mat36 basis_eval(double s, double L) {
  const Vec3 phi = chebyshev_basis(s, L);
  Mat36 B = Mat36::Zero();
  B.block<1, 3>(0, 0) = phi.transpose();
  B.block<1, 3>(1, 3) = phi.transpose();
  return B;
}

inline Vec3 curvature(const ModalCoefficients& c, double s, double L) {
  const Vec3 phi = chebyshev_basis(s, L);
  return {phi.dot(c.head<3>()), phi.dot(c.tail<3>()), 0.0};
}

/// Integral of the basis over [a, b] in closed form.
inline Vec3 chebyshev_basis_integral(double a, double b, double L) {
  auto antideriv = [L](double s) -> Vec3 {
    const double x = (2.0 * s - L) / L;
    // ds = L/2 dx
    return Vec3(x, 0.5 * x * x, 2.0 * x * x * x / 3.0 - x) * (0.5 * L);
  };
  return antideriv(b) - antideriv(a);
}

/// Gram matrix G_kl = int_0^L phi_k phi_l ds.
inline Mat3 chebyshev_gram(double L) {
  Mat3 G;
  G << 1.0, 0.0, -1.0 / 3.0,
       0.0, 1.0 / 3.0, 0.0,
       -1.0 / 3.0, 0.0, 7.0 / 15.0;
  return L * G;
}

/// Pose and body Jacobian J_xic(s) (columns: body twist per unit c_i).
struct Frame {
  Pose pose;
  Mat6 jacobian = Mat6::Zero();
};

class ModalKinematics {
 public:
  static constexpr int kDefaultSubdivisions = 24;

  explicit ModalKinematics(double length, int n_sub = kDefaultSubdivisions)
      : L_(length), n_sub_(n_sub) {
    if (!(length > 0.0)) throw DomainError("segment length must be positive");
    if (n_sub < 1) throw DomainError("Magnus subdivision count must be >= 1");
    const double h = L_ / n_sub_;
    steps_.reserve(n_sub_);
    for (int k = 0; k < n_sub_; ++k) steps_.push_back(make_step(k * h, (k + 1) * h));
  }

  double length() const { return L_; }
  int subdivisions() const { return n_sub_; }

  /// Frames at the given arclengths. Stations must lie in [0, L]; any order.
  std::vector<Frame> frames(const ModalCoefficients& c, std::span<const double> stations,
                            bool with_jacobian = true) const {
    std::vector<Frame> out(stations.size());
    std::vector<std::size_t> order(stations.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      detail::check_arclength(stations[i], L_);
      order[i] = i;
    }
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return stations[a] < stations[b]; });

    const double h = L_ / n_sub_;
    Frame knot;  // frame at knot k
    int k = 0;
    for (std::size_t idx : order) {
      const double s = std::clamp(stations[idx], 0.0, L_);
      int target = static_cast<int>(std::floor(s / h));
      if (target >= n_sub_) target = n_sub_;
      // snap onto the next knot when within rounding
      if (target < n_sub_ && std::abs((target + 1) * h - s) <= 1e-12 * L_) ++target;
      while (k < target) {
        advance(knot, steps_[k], c, with_jacobian);
        ++k;
      }
      const double rem = s - k * h;
      if (rem <= 1e-12 * L_) {
        out[idx] = knot;
      } else {
        Frame f = knot;
        advance(f, make_step(k * h, s), c, with_jacobian);
        out[idx] = f;
      }
    }
    return out;
  }

  Frame frame(const ModalCoefficients& c, double s, bool with_jacobian = true) const {
    const double st[1] = {s};
    return frames(c, st, with_jacobian).front();
  }

  Pose pose(const ModalCoefficients& c, double s) const { return frame(c, s, false).pose; }

  Mat6 body_jacobian(const ModalCoefficients& c, double s) const {
    return frame(c, s, true).jacobian;
  }

 private:
  struct Step {
    double h;
    Vec3 phi1, phi2;  // basis at the two Gauss-Legendre nodes
  };

  Step make_step(double a, double b) const {
    const double h = b - a;
    const double off = std::sqrt(3.0) / 6.0;
    return {h, chebyshev_basis(a + h * (0.5 - off), L_), chebyshev_basis(a + h * (0.5 + off), L_)};
  }

  static void advance(Frame& f, const Step& st, const ModalCoefficients& c, bool with_jacobian) {
    const Vec3 cx = c.head<3>(), cy = c.tail<3>();
    Vec6 eta1, eta2;
    eta1 << 0.0, 0.0, 1.0, st.phi1.dot(cx), st.phi1.dot(cy), 0.0;
    eta2 << 0.0, 0.0, 1.0, st.phi2.dot(cx), st.phi2.dot(cy), 0.0;
    const double h = st.h;
    const double kc = std::sqrt(3.0) / 12.0 * h * h;
    const Mat6 ad1 = ad(eta1);
    const Vec6 omega = 0.5 * h * (eta1 + eta2) + kc * (ad1 * eta2);
    const Pose E = se3_exp(omega);

    if (with_jacobian) {
      // d(eta)/dc has rows 3 and 4 only: [phi^T, 0] and [0, phi^T], so
      // dOmega = h/2 (d1 + d2) + kc (ad(eta1) d2 - ad(eta2) d1) is assembled
      // from outer products.
      const Mat6 ad2 = ad(eta2);
      const Vec3 mean = 0.5 * h * (st.phi1 + st.phi2);
      Mat6 domega;
      domega.leftCols<3>() = kc * (ad1.col(3) * st.phi2.transpose() - ad2.col(3) * st.phi1.transpose());
      domega.rightCols<3>() = kc * (ad1.col(4) * st.phi2.transpose() - ad2.col(4) * st.phi1.transpose());
      domega.block<1, 3>(3, 0) += mean.transpose();
      domega.block<1, 3>(4, 3) += mean.transpose();

      // J <- Ad(E^-1) J + Jr(omega) dOmega
      const Mat3 Rt = E.R.transpose();
      Mat6 J;
      J.topRows<3>() = Rt * (f.jacobian.topRows<3>() - hat(E.p) * f.jacobian.bottomRows<3>());
      J.bottomRows<3>() = Rt * f.jacobian.bottomRows<3>();
      J.noalias() += se3_right_jacobian(omega) * domega;
      f.jacobian = J;
    }
    f.pose = f.pose * E;
  }

  double L_;
  int n_sub_;
  std::vector<Step> steps_;
};

/// Free-function form of the Magnus pose.
inline Pose pose(const ModalCoefficients& c, double s, double L,
                 int n_sub = ModalKinematics::kDefaultSubdivisions) {
  return ModalKinematics(L, n_sub).pose(c, s);
}

inline Mat6 body_jacobian(const ModalCoefficients& c, double s, double L,
                          int n_sub = ModalKinematics::kDefaultSubdivisions) {
  return ModalKinematics(L, n_sub).body_jacobian(c, s);
}

// ---------------------------------------------------------------------------
// Tendon / string routing

struct RoutingChannel {
  double pitch_radius;  // m
  double angle;         // rad, station on the cross-section
  double s_start;       // m
  double s_end;         // m
  int passes = 1;       // 2 for a tendon that runs up to a pulley and back down

  double offset_x() const { return pitch_radius * std::cos(angle); }
  double offset_y() const { return pitch_radius * std::sin(angle); }
};

/// Channels 0..3 are sensing strings, 4 and 5 the actuation tendons of
/// capstans 1 and 2.
struct RoutingGeometry {
  std::array<RoutingChannel, 6> channels;

  const RoutingChannel& actuation(int capstan) const { return channels[4 + capstan]; }

  void validate(double L) const {
    for (std::size_t i = 0; i < channels.size(); ++i) {
      const auto& ch = channels[i];
      const std::string tag = "routing channel " + std::to_string(i);
      if (!(ch.pitch_radius > 0.0)) throw ConfigError(tag + ": pitch radius must be > 0");
      if (!std::isfinite(ch.angle)) throw ConfigError(tag + ": angle must be finite");
      if (ch.passes < 1) throw ConfigError(tag + ": pass count must be >= 1");
      if (!(ch.s_start >= 0.0 && ch.s_end <= L * (1.0 + 1e-12) && ch.s_start < ch.s_end))
        throw ConfigError(tag + ": span must be a nonempty subset of [0, L]");
    }
  }
};

/// Row of J_lc for one channel: first-order torsion-free length change
/// dl = int (p_y phi^T c_x - p_x phi^T c_y) ds over the channel span, once
/// per pass.
inline Eigen::Matrix<double, 1, 6> tendon_row(const RoutingChannel& ch, double L) {
  const Vec3 I = static_cast<double>(ch.passes) * chebyshev_basis_integral(ch.s_start, ch.s_end, L);
  Eigen::Matrix<double, 1, 6> row;
  row << ch.offset_y() * I.transpose(), -ch.offset_x() * I.transpose();
  return row;
}

/// Constant map c -> [dl_1..dl_4, dl_q1, dl_q2] and its inverse.
class TendonMap {
 public:
  TendonMap(const RoutingGeometry& geom, double L) : geom_(geom) {
    geom.validate(L);
    for (int i = 0; i < 6; ++i) J_.row(i) = tendon_row(geom.channels[i], L);
    lu_.compute(J_);
    const Eigen::JacobiSVD<Mat6> svd(J_);
    const auto& sv = svd.singularValues();
    if (!(sv(5) > 1e-10 * sv(0)))
      throw ConfigError("routing geometry gives a singular tendon map (condition number " +
                        std::to_string(sv(0) / sv(5)) +
                        "); sensing strings need distinct anchoring spans");
    cond_ = sv(0) / sv(5);
    inv_norm_ = 1.0 / sv(5);
  }

  const Mat6& matrix() const { return J_; }
  const RoutingGeometry& geometry() const { return geom_; }
  double condition_number() const { return cond_; }
  /// Spectral norm of the inverse map.
  double inverse_norm() const { return inv_norm_; }

  Vec6 lengths(const ModalCoefficients& c) const { return J_ * c; }

  ModalCoefficients shape_from_lengths(const Vec6& dl) const {
    if (!dl.allFinite()) throw DomainError("length changes contain NaN or Inf");
    return lu_.solve(dl);
  }

 private:
  RoutingGeometry geom_;
  Mat6 J_;
  Eigen::PartialPivLU<Mat6> lu_;
  double cond_ = 0.0;
  double inv_norm_ = 0.0;
};

/// Scale from capstan rate to tendon rate inverse: 2 pi / sqrt((2 pi r_c)^2 + lead^2).
inline double capstan_scale(double capstan_radius, double lead) {
  if (!(capstan_radius > 0.0)) throw DomainError("capstan radius must be positive");
  const double two_pi = 2.0 * std::numbers::pi;
  return two_pi / std::hypot(two_pi * capstan_radius, lead);
}

/// J_qc: capstan angular rates from modal rates.
inline Eigen::Matrix<double, 2, 6> capstan_jacobian(const Mat6& J_lc, double capstan_radius,
                                                    double lead) {
  return capstan_scale(capstan_radius, lead) * J_lc.bottomRows<2>();
}

/// Circular-ness measure: range of u_x and u_y over a dense arclength grid.
inline std::pair<double, double> circularness(const ModalCoefficients& c, double L,
                                              int grid = 1001) {
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (int i = 0; i < grid; ++i) {
    const double s = L * i / (grid - 1);
    const Vec3 u = curvature(c, s, L);
    xmin = std::min(xmin, u.x());
    xmax = std::max(xmax, u.x());
    ymin = std::min(ymin, u.y());
    ymax = std::max(ymax, u.y());
  }
  return {xmax - xmin, ymax - ymin};
}

}  // namespace cgmo
