#pragma once

// Physical parameters of one tendon-driven segment, SI units throughout.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "cgmo/errors.hpp"
#include "cgmo/lie.hpp"
#include "cgmo/modal_kinematics.hpp"

namespace cgmo {

/// Calibrated quantities: [EI_x, EI_y, mu_1, mu_2].
using Alpha = Eigen::Vector4d;

struct SegmentParams {
  double L = 0.0;       // m
  double r_c = 0.0;     // capstan radius, m
  double lead = 0.0;    // capstan lead (gamma), m
  double rho = 0.0;     // backbone mass per length, kg/m
  double r = 0.0;       // backbone radius, m
  double JG = 1.0;      // N m^2, kept for completeness; torsion is not a mode
  double J_A = 0.0;     // actuation chain inertia seen by a capstan, kg m^2
  Vec3 g = Vec3(0.0, 0.0, -9.81);

  std::vector<double> s_d;   // disk arclengths, last one at L
  std::vector<double> m_d;   // kg
  std::vector<Mat3> I_d;     // about the disk center of mass, kg m^2
  std::vector<Vec3> p_cm;    // center of mass in the disk frame, m

  double f_pl = 0.0;    // pretension per tendon side, N
  double EI_x = 0.0;    // N m^2
  double EI_y = 0.0;
  double mu1 = 0.0;     // bushing friction, capstan 1
  double mu2 = 0.0;     // bushing friction, capstan 2

  RoutingGeometry routing{};
  int n_sub = ModalKinematics::kDefaultSubdivisions;

  int n_d() const { return static_cast<int>(s_d.size()); }

  Alpha alpha() const { return {EI_x, EI_y, mu1, mu2}; }
  void set_alpha(const Alpha& a) {
    EI_x = a(0);
    EI_y = a(1);
    mu1 = a(2);
    mu2 = a(3);
  }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw ConfigError(std::string(name) + " must be positive and finite");
    };
    auto nonneg = [](double v, const char* name) {
      if (!(v >= 0.0) || !std::isfinite(v))
        throw ConfigError(std::string(name) + " must be nonnegative and finite");
    };
    positive(L, "L");
    positive(r_c, "r_c");
    nonneg(lead, "lead");
    positive(rho, "rho");
    positive(r, "r");
    nonneg(JG, "JG");
    positive(J_A, "J_A");
    positive(f_pl, "f_pl");
    nonneg(EI_x, "EI_x");
    nonneg(EI_y, "EI_y");
    nonneg(mu1, "mu1");
    nonneg(mu2, "mu2");
    if (!g.allFinite()) throw ConfigError("gravity must be finite");
    if (n_sub < 1) throw ConfigError("n_sub must be >= 1");

    const std::size_t n = s_d.size();
    if (n == 0) throw ConfigError("at least one disk is required");
    if (m_d.size() != n || I_d.size() != n || p_cm.size() != n)
      throw ConfigError("disk arrays s_d, m_d, I_d, p_cm must have equal length");
    for (std::size_t i = 0; i < n; ++i) {
      const std::string tag = "disk " + std::to_string(i + 1);
      if (!(s_d[i] > (i == 0 ? 0.0 : s_d[i - 1])))
        throw ConfigError(tag + ": s_d must be strictly increasing and positive");
      if (!(m_d[i] > 0.0)) throw ConfigError(tag + ": mass must be positive");
      if (!p_cm[i].allFinite()) throw ConfigError(tag + ": p_cm must be finite");
      if (!I_d[i].allFinite() || (I_d[i] - I_d[i].transpose()).norm() > 1e-12 * I_d[i].norm())
        throw ConfigError(tag + ": inertia must be symmetric");
      Eigen::SelfAdjointEigenSolver<Mat3> es(I_d[i], Eigen::EigenvaluesOnly);
      if (!(es.eigenvalues().minCoeff() > 0.0))
        throw ConfigError(tag + ": inertia must be positive definite");
    }
    if (std::abs(s_d.back() - L) > 1e-9 * L)
      throw ConfigError("last disk must sit at the segment tip (s_d[n_d-1] = L)");
    routing.validate(L);
  }
};

/// Two looped actuation tendons at 0 and 90 degrees over [0, L]; four
/// sensing strings terminated at the end disk and anchored on the first and
/// fifth spacer disks. Pitch radii are placeholders (the physical values are
/// not published); this layout gives a tendon-map condition number near 18.
inline RoutingGeometry default_routing(double L, const std::vector<double>& s_d) {
  if (s_d.size() < 2) throw ConfigError("default routing needs at least two disks");
  const double deg = std::numbers::pi / 180.0;
  const double r_string = 0.050, r_tendon = 0.065;
  const double near = s_d.front();
  const double far = s_d.size() >= 6 ? s_d[4] : s_d[s_d.size() - 2];
  RoutingGeometry g;
  g.channels[0] = {r_string, 45.0 * deg, near, L, 1};
  g.channels[1] = {r_string, 135.0 * deg, near, L, 1};
  g.channels[2] = {r_string, 225.0 * deg, far, L, 1};
  g.channels[3] = {r_string, 315.0 * deg, far, L, 1};
  g.channels[4] = {r_tendon, 0.0, 0.0, L, 2};
  g.channels[5] = {r_tendon, 90.0 * deg, 0.0, L, 2};
  return g;
}

/// Measured segment with the calibrated rigidities and friction of the
/// distal segment.
inline SegmentParams distal_segment() {
  SegmentParams p;
  p.L = 0.30065;
  p.r_c = 0.015255;
  p.lead = 0.00283;
  p.rho = 0.0831532;
  p.r = 0.002;
  p.JG = 1.0;
  p.J_A = 14.323e-3;
  p.g = Vec3(0.0, 0.0, -9.81);
  p.s_d = {0.05308, 0.10262, 0.15316, 0.20370, 0.25424, p.L};
  Mat3 I_small, I_end;
  I_small << 0.5211, 0.0024, -0.0002,
             0.0024, 0.5273, 0.0007,
             -0.0002, 0.0007, 0.9934;
  I_end << 1.1580, -0.0357, 0.0001,
           -0.0357, 1.4871, 0.0,
           0.0001, 0.0, 2.0564;
  for (int i = 0; i < 5; ++i) {
    p.m_d.push_back(0.30881);
    p.I_d.push_back(I_small * 1e-3);
    p.p_cm.push_back(Vec3(-0.0739, 0.1954, 5.7456) * 1e-3);
  }
  p.m_d.push_back(0.74312);
  p.I_d.push_back(I_end * 1e-3);
  p.p_cm.push_back(Vec3(-0.0133, 0.0, 20.8966) * 1e-3);
  p.f_pl = 208.0;
  p.set_alpha({1.1440, 1.0373, 0.0312, 0.1637});
  p.routing = default_routing(p.L, p.s_d);
  return p;
}

/// Proximal segment: same hardware layout, its own calibrated values.
inline SegmentParams proximal_segment() {
  SegmentParams p = distal_segment();
  p.set_alpha({1.6003, 2.1502, 0.0900, 0.2000});
  return p;
}

}  // namespace cgmo
