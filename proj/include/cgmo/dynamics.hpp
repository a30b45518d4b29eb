#pragma once

// Euler-Lagrange dynamics of one segment in modal coordinates:
//   M(c) cdd + N(c, cd) cd + dV/dc = J_qc^T tau + J_xic^T(s_c) w - kappa_fric

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "cgmo/errors.hpp"
#include "cgmo/lie.hpp"
#include "cgmo/modal_kinematics.hpp"
#include "cgmo/params.hpp"

namespace cgmo {

using Vec2 = Eigen::Vector2d;
using Mat26 = Eigen::Matrix<double, 2, 6>;

struct SegmentState {
  ModalCoefficients c = ModalCoefficients::Zero();
  Vec6 cdot = Vec6::Zero();  // 1/(m s)
};

/// Force followed by moment, both in the contact body frame.
struct Wrench {
  Vec3 f = Vec3::Zero();
  Vec3 m = Vec3::Zero();

  Vec6 vec() const {
    Vec6 w;
    w << f, m;
    return w;
  }
  static Wrench from(const Vec6& w) { return {w.head<3>(), w.tail<3>()}; }
};

/// Gauss-Legendre nodes and weights on [a, b].
struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline Quadrature gauss_legendre(int n, double a, double b) {
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const int j = n - 1 - i;  // ascending order
    q.nodes[j] = 0.5 * (b - a) * x + 0.5 * (a + b);
    q.weights[j] = (b - a) / ((1.0 - x * x) * dp * dp);
  }
  return q;
}

/// Tensions along the two tendons of each capstan. Station 0 is the base on
/// the way up, station n_d the end disk, then back down to the base.
struct TensionLadder {
  struct Side {
    double angle = 0.0;           // cross-section station of this tendon, rad
    std::vector<double> tension;  // f_0 (at the capstan) .. f_{2(n_d+1)}
    std::vector<double> friction; // per bushing, size 2(n_d+1)
    std::vector<double> normal;   // per bushing
    std::vector<Vec3> to_prev;    // unit vectors toward the previous station
    std::vector<Vec3> to_next;
    double total_friction() const {
      double s = 0.0;
      for (double f : friction) s += f;
      return s;
    }
  };
  std::array<Side, 2> pulled;    // f+ per capstan
  std::array<Side, 2> released;  // f- per capstan

  std::string dump() const {
    std::ostringstream os;
    for (int j = 0; j < 2; ++j) {
      for (const Side* s : {&pulled[j], &released[j]}) {
        os << "capstan " << j + 1 << (s == &pulled[j] ? " pulled:" : " released:");
        for (double f : s->tension) os << ' ' << f;
        os << '\n';
      }
    }
    return os.str();
  }
};

namespace detail {

/// Solve f = f_prev - mu * ||P (f_prev a + f b)|| on [0, f_prev]. Squaring
/// gives a quadratic in f whose admissible root is taken directly; bisection
/// on the unsquared residual is the fallback when the quadratic degenerates.
inline double solve_bushing(double f_prev, double mu, const Mat3& P, const Vec3& a, const Vec3& b,
                            double tol = 1e-9) {
  if (f_prev <= 0.0) return 0.0;
  const Vec3 Pa = P * a, Pb = P * b;
  auto resid = [&](double f) { return f - f_prev + mu * (f_prev * Pa + f * Pb).norm(); };
  if (resid(0.0) >= 0.0) return 0.0;  // friction can hold the full tension
  if (mu == 0.0) return f_prev;
  // (f_prev - f)^2 = mu^2 (A + 2 B f + C f^2)
  const double m2 = mu * mu;
  const double A = f_prev * f_prev * Pa.squaredNorm();
  const double B = f_prev * Pa.dot(Pb);
  const double C = Pb.squaredNorm();
  const double qa = 1.0 - m2 * C;
  const double qb = -2.0 * (f_prev + m2 * B);
  const double qc = f_prev * f_prev - m2 * A;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (qa > 1e-12 && disc >= 0.0) {
    const double sq = std::sqrt(disc);
    // numerically stable pair of roots
    const double q = -0.5 * (qb + std::copysign(sq, qb));
    for (double f : {q / qa, qc / q}) {
      if (f >= -tol && f <= f_prev + tol && std::abs(resid(f)) <= 1e-9 * std::max(1.0, f_prev))
        return std::clamp(f, 0.0, f_prev);
    }
  }
  double lo = 0.0, hi = f_prev;
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    (resid(mid) < 0.0 ? lo : hi) = mid;
  }
  if (hi - lo > tol) throw NumericalError("bushing tension solve did not converge");
  return 0.5 * (lo + hi);
}

}  // namespace detail

class SegmentModel {
 public:
  static constexpr int kQuadratureNodes = 16;

  explicit SegmentModel(SegmentParams params)
      : p_(std::move(params)),
        kin_((p_.validate(), p_.L), p_.n_sub),
        tendons_(p_.routing, p_.L),
        quad_(gauss_legendre(kQuadratureNodes, 0.0, p_.L)) {
    J_qc_ = capstan_jacobian(tendons_.matrix(), p_.r_c, p_.lead);
    M_A_ = p_.J_A * J_qc_.transpose() * J_qc_;

    const Mat3 G = chebyshev_gram(p_.L);
    K_c_.setZero();
    K_c_.topLeftCorner<3, 3>() = p_.EI_x * G;
    K_c_.bottomRightCorner<3, 3>() = p_.EI_y * G;

    D_cb_.setZero();
    D_cb_.diagonal() << p_.rho, p_.rho, p_.rho, 0.25 * p_.rho * p_.r * p_.r,
        0.25 * p_.rho * p_.r * p_.r, 0.5 * p_.rho * p_.r * p_.r;

    for (int i = 0; i < p_.n_d(); ++i) {
      Mat6 S = Mat6::Identity();
      S.topRightCorner<3, 3>() = -hat(p_.p_cm[i]);
      Mat6 D = Mat6::Zero();
      D.topLeftCorner<3, 3>() = p_.m_d[i] * Mat3::Identity();
      D.bottomRightCorner<3, 3>() = p_.I_d[i];
      disk_inertia_.push_back(S.transpose() * D * S);
      disk_shift_.push_back(S);
    }

    stations_ = quad_.nodes;
    stations_.insert(stations_.end(), p_.s_d.begin(), p_.s_d.end());
  }

  const SegmentParams& params() const { return p_; }
  const ModalKinematics& kinematics() const { return kin_; }
  const TendonMap& tendon_map() const { return tendons_; }
  const Mat26& capstan_jacobian_matrix() const { return J_qc_; }
  const Mat6& stiffness() const { return K_c_; }
  double length() const { return p_.L; }

  /// Frames at the quadrature nodes followed by the disk stations.
  std::vector<Frame> snapshot(const ModalCoefficients& c, bool with_jacobian = true) const {
    require_finite(c);
    return kin_.frames(c, stations_, with_jacobian);
  }

  Mat6 mass_matrix(const ModalCoefficients& c) const {
    return configuration_mass(snapshot(c)) + M_A_;
  }

  /// dM/dc_k by Richardson-extrapolated central differences on the
  /// configuration-dependent part. Near the straight shape Mdot is five orders
  /// below |M| |cdot|, so a plain central difference loses it to roundoff.
  std::array<Mat6, 6> mass_matrix_derivatives(const ModalCoefficients& c) const {
    require_finite(c);
    std::array<Mat6, 6> dM;
    auto central = [&](int k, double h) {
      ModalCoefficients cp = c, cm = c;
      cp(k) += h;
      cm(k) -= h;
      return Mat6((configuration_mass(snapshot(cp)) - configuration_mass(snapshot(cm))) / (2.0 * h));
    };
    for (int k = 0; k < 6; ++k) {
      const double h = 1e-3 * std::max(1.0, std::abs(c(k)));
      dM[k] = (4.0 * central(k, h) - central(k, 2.0 * h)) / 3.0;
    }
    return dM;
  }

  /// Christoffel-symbol Coriolis matrix from precomputed dM/dc.
  static Mat6 coriolis_from_derivatives(const std::array<Mat6, 6>& dM, const Vec6& cdot) {
    Mat6 N = Mat6::Zero();
    Mat6 Mdot = Mat6::Zero();
    for (int k = 0; k < 6; ++k) Mdot += dM[k] * cdot(k);
    // N_ij = 1/2 (Mdot_ij + sum_k dM_ik/dc_j cd_k - sum_k dM_kj/dc_i cd_k)
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) {
        double acc = Mdot(i, j);
        acc += dM[j].row(i).dot(cdot);
        acc -= dM[i].col(j).dot(cdot);
        N(i, j) = 0.5 * acc;
      }
    return N;
  }

  Mat6 coriolis_matrix(const ModalCoefficients& c, const Vec6& cdot) const {
    if (!cdot.allFinite()) throw DomainError("modal rates contain NaN or Inf");
    return coriolis_from_derivatives(mass_matrix_derivatives(c), cdot);
  }

  double kinetic_energy(const SegmentState& x) const {
    return 0.5 * x.cdot.dot(mass_matrix(x.c) * x.cdot);
  }

  double potential_energy(const ModalCoefficients& c) const {
    const auto fr = snapshot(c, false);
    const int nq = kQuadratureNodes;
    double V = 0.5 * c.dot(K_c_ * c);
    Vec3 integral = Vec3::Zero();
    for (int q = 0; q < nq; ++q) integral += quad_.weights[q] * fr[q].pose.p;
    V -= p_.rho * p_.g.dot(integral);
    for (int i = 0; i < p_.n_d(); ++i) {
      const Pose& T = fr[nq + i].pose;
      V -= p_.m_d[i] * p_.g.dot(T.p + T.R * p_.p_cm[i]);
    }
    return V;
  }

  Vec6 potential_gradient(const ModalCoefficients& c) const {
    return potential_gradient(c, snapshot(c));
  }

  /// Same, reusing frames from snapshot(c).
  Vec6 potential_gradient(const ModalCoefficients& c, const std::vector<Frame>& fr) const {
    const int nq = kQuadratureNodes;
    Vec6 grad = 0.5 * (K_c_ + K_c_.transpose()) * c;
    for (int q = 0; q < nq; ++q) {
      const Vec3 gb = fr[q].pose.R.transpose() * p_.g;
      grad -= quad_.weights[q] * p_.rho * fr[q].jacobian.topRows<3>().transpose() * gb;
    }
    for (int i = 0; i < p_.n_d(); ++i) {
      const Frame& F = fr[nq + i];
      const Vec3 gb = F.pose.R.transpose() * p_.g;
      const Eigen::Matrix<double, 3, 6> Jv = (disk_shift_[i] * F.jacobian).topRows<3>();
      grad -= p_.m_d[i] * Jv.transpose() * gb;
    }
    return grad;
  }

  Vec2 capstan_rates(const Vec6& cdot) const { return J_qc_ * cdot; }

  /// Tension cascade for the given configuration and capstan torques.
  TensionLadder tension_ladder(const ModalCoefficients& c, const Vec2& tau) const {
    return tension_ladder(c, tau, snapshot(c, false));
  }

  TensionLadder tension_ladder(const ModalCoefficients& c, const Vec2& tau,
                               const std::vector<Frame>& fr) const {
    (void)c;
    const int nd = p_.n_d();
    const int nq = kQuadratureNodes;
    // station poses: base then disks
    std::vector<const Pose*> poses(nd + 1);
    static const Pose base = Pose::identity();
    poses[0] = &base;
    for (int i = 0; i < nd; ++i) poses[i + 1] = &fr[nq + i].pose;

    TensionLadder ladder;
    for (int j = 0; j < 2; ++j) {
      const double mu = j == 0 ? p_.mu1 : p_.mu2;
      const RoutingChannel& ch = p_.routing.actuation(j);
      const double pull = std::abs(tau(j)) / p_.r_c;
      // positive torque winds the tendon opposite the channel station
      const double pulled_angle = ch.angle + (tau(j) >= 0.0 ? std::numbers::pi : 0.0);
      const double released_angle = pulled_angle + std::numbers::pi;
      build_side(ladder.pulled[j], poses, ch.pitch_radius, pulled_angle, p_.f_pl + pull, mu);
      build_side(ladder.released[j], poses, ch.pitch_radius, released_angle,
                 std::max(p_.f_pl - pull, 0.0), mu);
    }
    return ladder;
  }

  /// kappa_fric = J_qc^T tanh(10 qdot) r_c (total bushing friction).
  Vec6 friction_force(const ModalCoefficients& c, const Vec2& qdot, const Vec2& tau) const {
    return friction_force(c, qdot, tau, snapshot(c, false));
  }

  Vec6 friction_force(const ModalCoefficients& c, const Vec2& qdot, const Vec2& tau,
                      const std::vector<Frame>& fr) const {
    if (p_.mu1 == 0.0 && p_.mu2 == 0.0) return Vec6::Zero();
    const TensionLadder ladder = tension_ladder(c, tau, fr);
    Vec2 tau_F;
    for (int j = 0; j < 2; ++j) {
      const double total = ladder.pulled[j].total_friction() + ladder.released[j].total_friction();
      tau_F(j) = std::tanh(10.0 * qdot(j)) * p_.r_c * total;
    }
    return J_qc_.transpose() * tau_F;
  }

  Mat6 contact_jacobian(const ModalCoefficients& c, double s_c) const {
    detail::check_arclength(s_c, p_.L);
    return kin_.body_jacobian(c, s_c);
  }

  /// kappa = J_qc^T tau + J_xic^T(s_c) w - kappa_fric.
  Vec6 nonconservative_forces(const Vec2& tau, const Wrench& w, double s_c,
                              const ModalCoefficients& c, const Vec2& qdot) const {
    detail::check_arclength(s_c, p_.L);
    return J_qc_.transpose() * tau + contact_jacobian(c, s_c).transpose() * w.vec() -
           friction_force(c, qdot, tau);
  }

  /// Products N cd and N^T cd without forming N. With xi = J cd at each
  /// station, d(xi)/dc = Jdot + ad(xi) J (the body Jacobian columns satisfy
  /// d_k J_j - d_j J_k = ad(J_j) J_k), so only the rate Jdot along cd is
  /// differenced: N^T cd = 1/2 grad(cd^T M cd) and N cd = Mdot cd - N^T cd.
  struct VelocityProducts {
    Mat6 M;
    Vec6 N_cdot;
    Vec6 Nt_cdot;
  };

  VelocityProducts velocity_products(const SegmentState& x, const std::vector<Frame>& fr) const {
    VelocityProducts out;
    out.M = configuration_mass(fr) + M_A_;
    out.N_cdot.setZero();
    out.Nt_cdot.setZero();
    const double speed = x.cdot.lpNorm<Eigen::Infinity>();
    if (speed == 0.0) return out;
    const double eps = 1e-6 * std::max(1.0, x.c.lpNorm<Eigen::Infinity>()) / speed;
    const auto fp = snapshot(x.c + eps * x.cdot);
    const auto fm = snapshot(x.c - eps * x.cdot);
    const int nq = kQuadratureNodes;
    Vec6 mdot_cd = Vec6::Zero();
    for (std::size_t s = 0; s < fr.size(); ++s) {
      const bool disk = static_cast<int>(s) >= nq;
      const Mat6& J = fr[s].jacobian;
      const Mat6 Jdot = (fp[s].jacobian - fm[s].jacobian) / (2.0 * eps);
      const Vec6 xi = J * x.cdot;
      const Vec6 Gxi = disk ? Vec6(disk_inertia_[s - nq] * xi)
                            : Vec6(quad_.weights[s] * (D_cb_ * xi));
      const Vec6 xidot = Jdot * x.cdot;
      const Vec6 Gxidot = disk ? Vec6(disk_inertia_[s - nq] * xidot)
                               : Vec6(quad_.weights[s] * (D_cb_ * xidot));
      mdot_cd += Jdot.transpose() * Gxi + J.transpose() * Gxidot;
      out.Nt_cdot += (Jdot + ad(xi) * J).transpose() * Gxi;
    }
    out.N_cdot = mdot_cd - out.Nt_cdot;
    return out;
  }

  /// Every term of the equations of motion at one state.
  struct Terms {
    Mat6 M;
    Vec6 N_cdot;      // N cd
    Vec6 Nt_cdot;     // N^T cd
    Vec6 grad_V;
    Vec6 kappa_fric;
    Vec6 actuation;   // J_qc^T tau
  };

  Terms terms(const SegmentState& x, const Vec2& tau) const {
    require_finite(x.c);
    if (!x.cdot.allFinite()) throw DomainError("modal rates contain NaN or Inf");
    const auto fr = snapshot(x.c);
    const VelocityProducts vp = velocity_products(x, fr);
    Terms t;
    t.M = vp.M;
    t.N_cdot = vp.N_cdot;
    t.Nt_cdot = vp.Nt_cdot;
    t.grad_V = potential_gradient(x.c, fr);
    t.kappa_fric = friction_force(x.c, capstan_rates(x.cdot), tau, fr);
    t.actuation = J_qc_.transpose() * tau;
    return t;
  }

  /// cdd = M^-1 (kappa - N cd - dV/dc), plus an optional extra generalized
  /// force (e.g. reactions from a distal segment).
  Vec6 forward_dynamics(const SegmentState& x, const Vec2& tau, const Wrench& w, double s_c,
                        const Vec6& extra = Vec6::Zero()) const {
    detail::check_arclength(s_c, p_.L);
    const Terms t = terms(x, tau);
    Vec6 rhs = t.actuation - t.kappa_fric + extra - t.N_cdot - t.grad_V;
    if (w.vec().squaredNorm() > 0.0) rhs += contact_jacobian(x.c, s_c).transpose() * w.vec();
    Eigen::LLT<Mat6> llt(t.M);
    if (llt.info() != Eigen::Success)
      throw NumericalError("mass matrix is not positive definite; check segment parameters");
    return llt.solve(rhs);
  }

  /// Generalized force from the elbow motor and distal actuation reactions
  /// applied at the end disk.
  Vec6 distal_reaction(double tau_elbow, const Vec2& tau_dist, const ModalCoefficients& c) const {
    Vec6 w = Vec6::Zero();
    w(3) = tau_elbow + tau_dist(0);
    w(4) = tau_dist(1);
    return contact_jacobian(c, p_.L).transpose() * w;
  }

 private:
  Mat6 configuration_mass(const std::vector<Frame>& fr) const {
    const int nq = kQuadratureNodes;
    Mat6 M = Mat6::Zero();
    for (int q = 0; q < nq; ++q)
      M.noalias() += quad_.weights[q] * (fr[q].jacobian.transpose() * D_cb_ * fr[q].jacobian);
    for (int i = 0; i < p_.n_d(); ++i) {
      const Mat6& J = fr[nq + i].jacobian;
      M.noalias() += J.transpose() * disk_inertia_[i] * J;
    }
    return 0.5 * (M + M.transpose());
  }

  void build_side(TensionLadder::Side& side, const std::vector<const Pose*>& poses,
                  double radius, double angle, double f0, double mu) const {
    const int nd = static_cast<int>(poses.size()) - 1;
    const Vec3 offset(radius * std::cos(angle), radius * std::sin(angle), 0.0);
    // route: up through stations 0..nd, then down nd..0
    std::vector<int> route;
    for (int k = 0; k <= nd; ++k) route.push_back(k);
    for (int k = nd; k >= 0; --k) route.push_back(k);
    const int n = static_cast<int>(route.size());
    std::vector<Vec3> hole(nd + 1);
    for (int k = 0; k <= nd; ++k) hole[k] = poses[k]->p + poses[k]->R * offset;

    side.angle = angle;
    side.tension.assign(1, f0);
    side.friction.clear();
    side.normal.clear();
    side.to_prev.clear();
    side.to_next.clear();
    for (int m = 0; m < n; ++m) {
      const int k = route[m];
      const Pose& T = *poses[k];
      const Vec3 axis = T.R.col(2);
      // toward the previous / next point on the tendon path; the capstan and
      // termination lie below the base, the pulley above the end disk
      const Vec3 a = m == 0        ? Vec3(-axis)
                     : m == nd + 1 ? axis
                                   : Vec3((hole[route[m - 1]] - hole[k]).normalized());
      const Vec3 b = m == n - 1 ? Vec3(-axis)
                     : m == nd  ? axis
                                : Vec3((hole[route[m + 1]] - hole[k]).normalized());
      const Mat3 P = Mat3::Identity() - axis * axis.transpose();
      const double f_prev = side.tension.back();
      const double f = detail::solve_bushing(f_prev, mu, P, a, b);
      side.tension.push_back(f);
      side.friction.push_back(f_prev - f);
      side.normal.push_back((P * (f_prev * a + f * b)).norm());
      side.to_prev.push_back(a);
      side.to_next.push_back(b);
    }
  }

  SegmentParams p_;
  ModalKinematics kin_;
  TendonMap tendons_;
  Quadrature quad_;
  Mat26 J_qc_;
  Mat6 M_A_;
  Mat6 K_c_;
  Mat6 D_cb_;
  std::vector<Mat6> disk_inertia_;
  std::vector<Mat6> disk_shift_;
  std::vector<double> stations_;
};

/// Copy of the proximal parameters with the distal segment, held straight,
/// lumped into the end disk as one rigid body.
inline SegmentParams lump_distal_segment(const SegmentParams& proximal,
                                         const SegmentParams& distal) {
  SegmentParams out = proximal;
  const int e = proximal.n_d() - 1;
  // bodies in the proximal end-disk frame
  struct Body {
    double m;
    Vec3 c;
    Mat3 I;
  };
  std::vector<Body> bodies;
  bodies.push_back({proximal.m_d[e], proximal.p_cm[e], proximal.I_d[e]});
  const double m_bb = distal.rho * distal.L;
  const double r2 = distal.r * distal.r;
  Mat3 I_bb = Mat3::Zero();
  I_bb(0, 0) = I_bb(1, 1) = m_bb * (r2 / 4.0 + distal.L * distal.L / 12.0);
  I_bb(2, 2) = m_bb * r2 / 2.0;
  bodies.push_back({m_bb, Vec3(0.0, 0.0, 0.5 * distal.L), I_bb});
  for (int i = 0; i < distal.n_d(); ++i)
    bodies.push_back({distal.m_d[i], Vec3(0.0, 0.0, distal.s_d[i]) + distal.p_cm[i],
                      distal.I_d[i]});

  double m = 0.0;
  Vec3 com = Vec3::Zero();
  for (const auto& b : bodies) {
    m += b.m;
    com += b.m * b.c;
  }
  com /= m;
  Mat3 I = Mat3::Zero();
  for (const auto& b : bodies) {
    const Vec3 d = b.c - com;
    I += b.I + b.m * (d.squaredNorm() * Mat3::Identity() - d * d.transpose());
  }
  out.m_d[e] = m;
  out.p_cm[e] = com;
  out.I_d[e] = 0.5 * (I + I.transpose());
  return out;
}

}  // namespace cgmo
