#pragma once

// Contact estimation in modal space: generalized momentum observer, joint
// force deviation, constrained wrench recovery, residual sensitivity and
// threshold detection.

#include <array>
#include <cmath>
#include <cstdio>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "cgmo/dynamics.hpp"
#include "cgmo/errors.hpp"

namespace cgmo {

using Mat612 = Eigen::Matrix<double, 6, 12>;
using Vec12d = Eigen::Matrix<double, 12, 1>;

inline Vec6 generalized_momentum(const SegmentModel& model, const SegmentState& x) {
  return model.mass_matrix(x.c) * x.cdot;
}

/// Known generalized forces entering the momentum balance:
/// beta = N^T cd - dV/dc + J_qc^T tau - kappa_fric, plus the momentum itself.
struct MomentumBalance {
  Vec6 p;
  Vec6 beta;
};

inline MomentumBalance momentum_balance(const SegmentModel& model, const SegmentState& x,
                                        const Vec2& tau, const Vec6& extra = Vec6::Zero()) {
  const auto t = model.terms(x, tau);
  return {t.M * x.cdot, t.Nt_cdot - t.grad_V + t.actuation - t.kappa_fric + extra};
}

struct GmoConfig {
  Vec6 gains = Vec6::Constant(25.0);  // diagonal of K_o, 1/s
  double dt = 0.01;                   // cycle time, s
  int window = 0;                     // samples in the running sum; 0 = all since reset
  int reset_horizon = 3000;           // n_w, cycles between resets

  void validate() const {
    if (!(gains.array() >= 0.0).all() || !gains.allFinite())
      throw ConfigError("observer gains must be finite and nonnegative");
    if (!(dt > 0.0)) throw ConfigError("observer cycle time must be positive");
    if (window < 0) throw ConfigError("observer window must be >= 0");
    if (reset_horizon < 1) throw ConfigError("observer reset horizon must be >= 1");
    if (window > 0 && window > reset_horizon)
      throw ConfigError("observer window must not exceed the reset horizon");
  }
};

struct GmoState {
  Vec6 gains = Vec6::Zero();
  Vec6 p1 = Vec6::Zero();
  Vec6 integral_acc = Vec6::Zero();
  Vec6 r_prev = Vec6::Zero();
  Vec6 beta_prev = Vec6::Zero();
  bool has_beta = false;
  int n = 0;
  int n_w = 0;
  int k = 0;  // cycles since the last reset
  double dt = 0.0;
  // last n cycles: (pdot_hat * dt, p)
  std::deque<std::pair<Vec6, Vec6>> ring;
};

/// Discrete observer r_k = K [p_k - p_ref - sum pdot_hat_j dt] with
/// pdot_hat_j = (beta_j + beta_{j-1}) / 2 + r_{j-1}. The trapezoid on beta
/// keeps the quadrature error second order when the segment rings; the first
/// cycle after a reset has no beta_{j-1} and uses beta_j alone. p_ref is the latched momentum at the last
/// reset, or p_{k-n} once the window is full.
class MomentumObserver {
 public:
  MomentumObserver(const SegmentModel& model, GmoConfig cfg) : model_(&model), cfg_(cfg) {
    cfg_.validate();
  }

  const GmoConfig& config() const { return cfg_; }
  const GmoState& state() const { return st_; }
  bool initialized() const { return initialized_; }

  void init(const SegmentState& x0) { reset(generalized_momentum(*model_, x0)); }

  /// One cycle at sample x_k with capstan torques tau_k. `extra` carries known
  /// generalized forces beyond the single-segment model (e.g. distal reactions).
  Vec6 step(const SegmentState& x, const Vec2& tau, const Vec6& extra = Vec6::Zero()) {
    const MomentumBalance mb = momentum_balance(*model_, x, tau, extra);
    return step(mb);
  }

  Vec6 step(const MomentumBalance& mb) {
    if (!initialized_) throw std::logic_error("momentum observer stepped before init");
    if (st_.k >= st_.n_w) {
      reset(mb.p);
      st_.beta_prev = mb.beta;
      st_.has_beta = true;
      return st_.r_prev;
    }
    const Vec6 beta = st_.has_beta ? Vec6(0.5 * (mb.beta + st_.beta_prev)) : mb.beta;
    st_.beta_prev = mb.beta;
    st_.has_beta = true;
    const Vec6 inc = (beta + st_.r_prev) * st_.dt;
    st_.integral_acc += inc;
    Vec6 p_ref = st_.p1;
    if (st_.n > 0) {
      st_.ring.emplace_back(inc, mb.p);
      if (static_cast<int>(st_.ring.size()) > st_.n) {
        // the dropped sample is the one just before the window start
        st_.integral_acc -= st_.ring.front().first;
        p_ref = st_.ring.front().second;
        st_.ring.pop_front();
      }
    }
    ++st_.k;
    st_.r_prev = (st_.gains.array() * (mb.p - p_ref - st_.integral_acc).array()).matrix();
    return st_.r_prev;
  }

 private:
  void reset(const Vec6& p) {
    st_ = GmoState{};
    st_.gains = cfg_.gains;
    st_.p1 = p;
    st_.n = cfg_.window;
    st_.n_w = cfg_.reset_horizon;
    st_.dt = cfg_.dt;
    initialized_ = true;
  }

  const SegmentModel* model_;
  GmoConfig cfg_;
  GmoState st_;
  bool initialized_ = false;
};

/// Joint force deviation: kappa_c = M cdd + N cd + dV/dc - J_qc^T tau + kappa_fric.
inline Vec6 jfd(const SegmentModel& model, const SegmentState& x, const Vec6& cddot,
                const Vec2& tau, const Vec6& extra = Vec6::Zero()) {
  const auto t = model.terms(x, tau);
  return t.M * cddot + t.N_cdot + t.grad_V - t.actuation + t.kappa_fric - extra;
}

// ---------------------------------------------------------------------------
// Wrench recovery

/// Point contact: no force along the local tangent and no moments.
inline Eigen::MatrixXd point_contact_constraints() {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(4, 6);
  A.rightCols<4>().setIdentity();
  return A;
}

struct WrenchEstimationProblem {
  Vec6 W = Vec6::Ones();  // diagonal weight
  Eigen::MatrixXd A = point_contact_constraints();
  double s_c = 0.0;

  void validate() const {
    if (!(W.array() > 0.0).all() || !W.allFinite())
      throw ConfigError("wrench weight must be positive definite diagonal");
    if (A.cols() != 6) throw ConfigError("constraint matrix must have 6 columns");
    if (!A.allFinite()) throw ConfigError("constraint matrix must be finite");
  }
};

/// Minimum W-norm wrench with J^T w = r (after projecting r onto what the
/// contact Jacobian can produce under A w = 0) and A w = 0.
inline Wrench estimate_wrench(const Vec6& r, const WrenchEstimationProblem& prob,
                              const Mat6& J_contact) {
  prob.validate();
  if (!r.allFinite()) throw DomainError("residual contains NaN or Inf");
  const Eigen::Index nc = prob.A.rows();
  const Mat6 Jt = J_contact.transpose();

  // achievable residuals: range(J^T Z), Z spanning ker A
  Eigen::MatrixXd Z;
  if (nc == 0) {
    Z = Eigen::MatrixXd::Identity(6, 6);
  } else {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(prob.A);
    Z = lu.kernel();
    if (lu.rank() == 6) return Wrench{};
    // orthonormalize for a well-scaled projection
    Eigen::HouseholderQR<Eigen::MatrixXd> q(Z);
    Z = q.householderQ() * Eigen::MatrixXd::Identity(6, Z.cols());
  }
  const Eigen::MatrixXd B = Jt * Z;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return Wrench{};
  const double tol = 1e-10 * sv(0);
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > tol) ++rank;
  const Eigen::MatrixXd U = svd.matrixU().leftCols(rank);
  const Vec6 r_proj = U * (U.transpose() * r);

  // independent rows of C = [J^T; A]
  Eigen::MatrixXd C(6 + nc, 6);
  C << Jt, prob.A;
  Eigen::VectorXd d = Eigen::VectorXd::Zero(6 + nc);
  d.head<6>() = r_proj;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rows(C.transpose());
  rows.setThreshold(1e-10);
  const Eigen::Index m = rows.rank();
  Eigen::MatrixXd Cr(m, 6);
  Eigen::VectorXd dr(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index idx = rows.colsPermutation().indices()(i);
    Cr.row(i) = C.row(idx);
    dr(i) = d(idx);
  }

  // [2W C^T; C 0] [w; lambda] = [0; d]
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(6 + m, 6 + m);
  K.topLeftCorner<6, 6>() = 2.0 * prob.W.asDiagonal();
  K.topRightCorner(6, m) = Cr.transpose();
  K.bottomLeftCorner(m, 6) = Cr;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(6 + m);
  rhs.tail(m) = dr;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
  const Vec6 w = lu.solve(rhs).head<6>();

  // backward-error test: an ill-conditioned Jacobian inflates |w|, not the
  // relative residual
  const double resid = (Jt * w - r_proj).norm();
  const double cres = nc ? (prob.A * w).norm() : 0.0;
  const double scale = Jt.norm() * w.norm() + r_proj.norm();
  if (resid > 1e-9 * scale + 1e-14 || cres > 1e-12 * std::max(1.0, prob.A.norm() * w.norm()))
  {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "wrench constraints are inconsistent after projection (residual %.3g, "
                  "constraint residual %.3g)",
                  resid, cres);
    throw NumericalError(msg);
  }
  return Wrench::from(w);
}

inline Wrench estimate_wrench(const SegmentModel& model, const Vec6& r,
                              const WrenchEstimationProblem& prob, const ModalCoefficients& c) {
  return estimate_wrench(r, prob, model.contact_jacobian(c, prob.s_c));
}

// ---------------------------------------------------------------------------
// State-uncertainty propagation

/// dr/dx for a constant state error dx applied to every sample after the
/// observer was initialized (p1 is a recorded constant). Propagates
///   D_k = K [dp_k/dx - dp_ref/dx - sum_j (dbeta_j/dx + D_{j-1}) dt]
/// with dbeta/dx and dp/dx by central differences of the model, and dbeta
/// averaged over consecutive samples exactly as the observer does.
class ResidualSensitivity {
 public:
  ResidualSensitivity(const SegmentModel& model, GmoConfig cfg) : model_(&model), cfg_(cfg) {
    cfg_.validate();
  }

  void init() {
    D_prev_.setZero();
    acc_.setZero();
    has_dbeta_ = false;
    ring_.clear();
    k_ = 0;
    initialized_ = true;
  }

  /// Partial derivatives of (p, beta) with respect to x = [c; cd].
  struct Partials {
    Mat612 dp;
    Mat612 dbeta;
  };

  Partials partials(const SegmentState& x, const Vec2& tau, const Vec6& extra = Vec6::Zero()) const {
    Partials out;
    for (int j = 0; j < 12; ++j) {
      const double base = j < 6 ? x.c(j) : x.cdot(j - 6);
      const double h = 1e-6 * std::max(1.0, std::abs(base));
      SegmentState xp = x, xm = x;
      if (j < 6) {
        xp.c(j) += h;
        xm.c(j) -= h;
      } else {
        xp.cdot(j - 6) += h;
        xm.cdot(j - 6) -= h;
      }
      const MomentumBalance bp = momentum_balance(*model_, xp, tau, extra);
      const MomentumBalance bm = momentum_balance(*model_, xm, tau, extra);
      out.dp.col(j) = (bp.p - bm.p) / (2.0 * h);
      out.dbeta.col(j) = (bp.beta - bm.beta) / (2.0 * h);
    }
    return out;
  }

  Mat612 step(const SegmentState& x, const Vec2& tau, const Vec6& extra = Vec6::Zero()) {
    return step(partials(x, tau, extra));
  }

  Mat612 step(const Partials& d) {
    if (!initialized_) throw std::logic_error("residual sensitivity stepped before init");
    if (k_ >= cfg_.reset_horizon) {
      init();
      dbeta_prev_ = d.dbeta;
      has_dbeta_ = true;
      return D_prev_;
    }
    const Mat612 dbeta = has_dbeta_ ? Mat612(0.5 * (d.dbeta + dbeta_prev_)) : d.dbeta;
    dbeta_prev_ = d.dbeta;
    has_dbeta_ = true;
    const Mat612 inc = (dbeta + D_prev_) * cfg_.dt;
    acc_ += inc;
    Mat612 ref = Mat612::Zero();
    if (cfg_.window > 0) {
      ring_.emplace_back(inc, d.dp);
      if (static_cast<int>(ring_.size()) > cfg_.window) {
        acc_ -= ring_.front().first;
        ref = ring_.front().second;
        ring_.pop_front();
      }
    }
    ++k_;
    D_prev_ = cfg_.gains.asDiagonal() * (d.dp - ref - acc_);
    return D_prev_;
  }

 private:
  const SegmentModel* model_;
  GmoConfig cfg_;
  Mat612 D_prev_ = Mat612::Zero();
  Mat612 acc_ = Mat612::Zero();
  Mat612 dbeta_prev_ = Mat612::Zero();
  bool has_dbeta_ = false;
  std::deque<std::pair<Mat612, Mat612>> ring_;
  int k_ = 0;
  bool initialized_ = false;
};

/// Worst-case linearized residual: threshold_i = sum_j |drdx_ij| dx_j.
inline Vec6 detection_thresholds(const Mat612& drdx, const Vec12d& dx_bound) {
  if (!(dx_bound.array() >= 0.0).all()) throw DomainError("state error bounds must be >= 0");
  return drdx.cwiseAbs() * dx_bound;
}

struct Detection {
  std::array<bool, 6> element{};
  bool any = false;
};

/// Strict comparison: a residual equal to its threshold is not a contact.
inline Detection detect(const Vec6& r, const Vec6& thresholds) {
  Detection d;
  for (int i = 0; i < 6; ++i) {
    d.element[i] = std::abs(r(i)) > thresholds(i);
    d.any = d.any || d.element[i];
  }
  return d;
}

struct ContactEstimate {
  Vec6 r = Vec6::Zero();
  Wrench w_hat;
  Vec6 thresholds = Vec6::Zero();
  Detection detected;
  double s_c = 0.0;
};

}  // namespace cgmo
