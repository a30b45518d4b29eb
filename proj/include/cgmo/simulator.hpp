#pragma once

// Time integration (Dormand-Prince 5(4) with dense output), input signals,
// sensor noise and causal smoothed differentiation.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cgmo/dynamics.hpp"
#include "cgmo/errors.hpp"

namespace cgmo {

using Vec12 = Eigen::Matrix<double, 12, 1>;

/// Sampled motion with the inputs that produced it.
struct Trajectory {
  std::vector<double> t;
  std::vector<Vec6> c, cdot, cddot;
  std::vector<Vec2> tau;
  std::vector<Wrench> w_true;
  std::vector<double> s_c;

  std::size_t size() const { return t.size(); }

  SegmentState state(std::size_t k) const { return {c[k], cdot[k]}; }

  void validate() const {
    const std::size_t n = t.size();
    if (c.size() != n || cdot.size() != n || cddot.size() != n || tau.size() != n ||
        w_true.size() != n || s_c.size() != n)
      throw ConfigError("trajectory series have different lengths");
    for (std::size_t k = 1; k < n; ++k)
      if (!(t[k] > t[k - 1])) throw ConfigError("trajectory time stamps must increase strictly");
  }

  /// Mean sample spacing.
  double dt() const {
    if (t.size() < 2) throw ConfigError("trajectory needs at least two samples");
    return (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  }
};

struct ContactInput {
  Wrench w;
  double s_c = 0.0;
};

using TorqueFn = std::function<Vec2(double, const SegmentState&)>;
using ContactFn = std::function<ContactInput(double)>;
using ExtraForceFn = std::function<Vec6(double, const SegmentState&)>;

struct IntegratorOptions {
  double rtol = 1e-6;
  double atol = 1e-8;
  double sample_rate = 100.0;  // Hz
  double max_step = std::numeric_limits<double>::infinity();
  long max_steps = 2'000'000;
};

namespace detail {

// Dormand-Prince tableau.
struct DP5 {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
};

}  // namespace detail

/// Generic adaptive DOPRI5 on a fixed-size state. `observe(t, y)` is called
/// on the uniform output grid t0 + k/rate (k = 0, 1, ...) up to t1.
template <int N, typename Rhs, typename Observe>
void dopri5(Rhs&& f, double t0, double t1, const Eigen::Matrix<double, N, 1>& y0,
            const IntegratorOptions& opt, Observe&& observe) {
  using Vec = Eigen::Matrix<double, N, 1>;
  using D = detail::DP5;
  if (!(opt.rtol > 0.0 && opt.atol > 0.0)) throw DomainError("tolerances must be positive");
  if (!(t1 > t0)) throw DomainError("integration span must be increasing");
  if (!(opt.sample_rate > 0.0)) throw DomainError("sample rate must be positive");

  const double dt_out = 1.0 / opt.sample_rate;
  const long n_out = static_cast<long>(std::floor((t1 - t0) / dt_out + 1e-9));
  long next_out = 0;

  auto scale = [&](const Vec& a, const Vec& b) {
    return Vec((opt.atol + opt.rtol * a.cwiseAbs().cwiseMax(b.cwiseAbs()).array()).matrix());
  };
  auto rms = [](const Vec& v) { return std::sqrt(v.squaredNorm() / static_cast<double>(N)); };

  Vec y = y0;
  double t = t0;
  Vec k1 = f(t, y);

  // starting step (Hairer & Wanner II.4)
  double h;
  {
    const Vec sc = scale(y, y);
    const double d0 = rms(y.cwiseQuotient(sc)), d1 = rms(k1.cwiseQuotient(sc));
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, t1 - t0);
    const Vec k = f(t + h0, Vec(y + h0 * k1));
    const double d2 = rms((k - k1).cwiseQuotient(sc)) / h0;
    const double h1 = (std::max(d1, d2) <= 1e-15) ? std::max(1e-6, h0 * 1e-3)
                                                  : std::pow(0.01 / std::max(d1, d2), 0.2);
    h = std::min({100.0 * h0, h1, opt.max_step, t1 - t0});
  }

  observe(t0, y);
  next_out = 1;
  long steps = 0;
  while (t < t1) {
    if (++steps > opt.max_steps)
      throw StiffnessError<Vec>("step budget exhausted at t = " + std::to_string(t), t, y);
    const double min_h = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
    if (h < min_h)
      throw StiffnessError<Vec>("step size underflow at t = " + std::to_string(t), t, y);
    const bool last = t + h >= t1;
    if (last) h = t1 - t;

    const Vec k2 = f(t + D::c2 * h, Vec(y + h * D::a21 * k1));
    const Vec k3 = f(t + D::c3 * h, Vec(y + h * (D::a31 * k1 + D::a32 * k2)));
    const Vec k4 = f(t + D::c4 * h, Vec(y + h * (D::a41 * k1 + D::a42 * k2 + D::a43 * k3)));
    const Vec k5 = f(t + D::c5 * h,
                     Vec(y + h * (D::a51 * k1 + D::a52 * k2 + D::a53 * k3 + D::a54 * k4)));
    const Vec k6 = f(t + h, Vec(y + h * (D::a61 * k1 + D::a62 * k2 + D::a63 * k3 +
                                         D::a64 * k4 + D::a65 * k5)));
    const Vec y1 = y + h * (D::b1 * k1 + D::b3 * k3 + D::b4 * k4 + D::b5 * k5 + D::b6 * k6);
    const Vec k7 = f(t + h, y1);
    const Vec err =
        h * (D::e1 * k1 + D::e3 * k3 + D::e4 * k4 + D::e5 * k5 + D::e6 * k6 + D::e7 * k7);
    const double en = rms(err.cwiseQuotient(scale(y, y1)));
    if (!std::isfinite(en)) {
      h *= 0.2;
      continue;
    }
    if (en <= 1.0) {
      const double t_new = last ? t1 : t + h;
      // dense output on the sampling grid inside (t, t_new]
      const Vec r2 = y1 - y;
      const Vec r3 = h * k1 - r2;
      const Vec r4 = r2 - h * k7 - r3;
      const Vec r5 = h * (D::d1 * k1 + D::d3 * k3 + D::d4 * k4 + D::d5 * k5 + D::d6 * k6 +
                          D::d7 * k7);
      while (next_out <= n_out) {
        const double ts = t0 + next_out * dt_out;
        if (ts > t_new + 1e-12 * std::max(1.0, std::abs(t_new))) break;
        const double th = std::clamp((ts - t) / h, 0.0, 1.0);
        const double th1 = 1.0 - th;
        const Vec ys = y + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
        observe(ts, ys);
        ++next_out;
      }
      t = t_new;
      y = y1;
      k1 = k7;
      const double fac = en == 0.0 ? 10.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 10.0);
      h = std::min(h * fac, opt.max_step);
    } else {
      h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
    }
  }
}

/// Integrate the segment from x0 and sample the motion on the output grid.
/// cddot at each sample comes from the dynamics at the sampled state.
inline Trajectory integrate(const SegmentModel& model, const SegmentState& x0,
                            const TorqueFn& tau_fn, const ContactFn& contact_fn, double t0,
                            double t1, const IntegratorOptions& opt = {},
                            const ExtraForceFn& extra_fn = nullptr) {
  auto unpack = [](const Vec12& y) { return SegmentState{y.head<6>(), y.tail<6>()}; };
  auto accel = [&](double t, const SegmentState& x, Vec2* tau_out, ContactInput* ci_out) {
    const Vec2 tau = tau_fn ? tau_fn(t, x) : Vec2::Zero();
    const ContactInput ci = contact_fn ? contact_fn(t) : ContactInput{Wrench{}, model.length()};
    const Vec6 extra = extra_fn ? extra_fn(t, x) : Vec6::Zero();
    if (tau_out) *tau_out = tau;
    if (ci_out) *ci_out = ci;
    return model.forward_dynamics(x, tau, ci.w, ci.s_c, extra);
  };
  auto rhs = [&](double t, const Vec12& y) {
    const SegmentState x = unpack(y);
    Vec12 dy;
    dy << x.cdot, accel(t, x, nullptr, nullptr);
    return dy;
  };
  Trajectory tr;
  Vec12 y0;
  y0 << x0.c, x0.cdot;
  dopri5<12>(rhs, t0, t1, y0, opt, [&](double t, const Vec12& y) {
    const SegmentState x = unpack(y);
    Vec2 tau;
    ContactInput ci;
    const Vec6 cdd = accel(t, x, &tau, &ci);
    tr.t.push_back(t);
    tr.c.push_back(x.c);
    tr.cdot.push_back(x.cdot);
    tr.cddot.push_back(cdd);
    tr.tau.push_back(tau);
    tr.w_true.push_back(ci.w);
    tr.s_c.push_back(ci.s_c);
  });
  return tr;
}

/// Linear chirp q(t) = q_max sin(2 pi ((f1 - f0)/(2 t_f) t^2 + f0 t) + phi0);
/// the instantaneous frequency runs from f0 at t = 0 to f1 at t = t_f.
inline double chirp(double t, double q_max, double f0, double f1, double t_f, double phi0) {
  if (!(t_f > 0.0)) throw DomainError("chirp duration must be positive");
  const double phase = 2.0 * std::numbers::pi * ((f1 - f0) / (2.0 * t_f) * t * t + f0 * t) + phi0;
  return q_max * std::sin(phase);
}

inline double chirp_frequency(double t, double f0, double f1, double t_f) {
  if (!(t_f > 0.0)) throw DomainError("chirp duration must be positive");
  return f0 + (f1 - f0) * t / t_f;
}

enum class NoiseKind { Uniform, Gaussian };

/// Sensor noise on the modal coefficients. Uniform noise lies in
/// [-A/2, A/2]; Gaussian noise uses sigma = A/6 so +-3 sigma spans A.
struct NoiseSpec {
  double amplitude = 0.0;  // peak to peak
  std::uint64_t seed = 0;
  NoiseKind kind = NoiseKind::Uniform;
};

inline Trajectory add_noise(Trajectory tr, const NoiseSpec& spec) {
  if (!(spec.amplitude >= 0.0)) throw DomainError("noise amplitude must be >= 0");
  if (spec.amplitude == 0.0) return tr;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> uni(-0.5 * spec.amplitude, 0.5 * spec.amplitude);
  std::normal_distribution<double> gauss(0.0, spec.amplitude / 6.0);
  for (auto& c : tr.c)
    for (int i = 0; i < 6; ++i)
      c(i) += spec.kind == NoiseKind::Uniform ? uni(rng) : gauss(rng);
  return tr;
}

/// Causal smoothing with half-Gaussian weights exp(-j^2 / (2 sigma^2)),
/// j = 0..window-1 samples into the past, sigma = window/4. Weights are
/// renormalized over the samples available during warm-up.
template <typename V>
std::vector<V> causal_gaussian_smooth(const std::vector<V>& x, int window) {
  if (window < 1) throw DomainError("smoothing window must be >= 1");
  if (x.size() < static_cast<std::size_t>(window))
    throw DomainError("series of " + std::to_string(x.size()) + " samples is shorter than window " +
                      std::to_string(window));
  const double sigma = window / 4.0;
  std::vector<double> g(window);
  for (int j = 0; j < window; ++j) g[j] = std::exp(-0.5 * j * j / (sigma * sigma));
  std::vector<V> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const int avail = static_cast<int>(std::min<std::size_t>(k + 1, window));
    V acc = x[k] * 0.0;
    double wsum = 0.0;
    for (int j = 0; j < avail; ++j) {
      acc += g[j] * x[k - j];
      wsum += g[j];
    }
    out[k] = acc / wsum;
  }
  return out;
}

/// Causal Gaussian smoothing followed by a backward difference; d_0 = 0.
template <typename V>
std::vector<V> smoothed_derivative(const std::vector<V>& x, int window, double dt) {
  if (!(dt > 0.0)) throw DomainError("sample spacing must be positive");
  const auto s = causal_gaussian_smooth(x, window);
  std::vector<V> d(x.size());
  d[0] = x[0] * 0.0;
  for (std::size_t k = 1; k < x.size(); ++k) d[k] = (s[k] - s[k - 1]) / dt;
  return d;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t'))
    s.remove_suffix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("cannot parse number '" + std::string(s) + "' at " + where);
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

inline std::vector<std::string> trajectory_columns() {
  std::vector<std::string> cols{"t"};
  for (const char* p : {"c", "cd", "cdd"})
    for (int i = 1; i <= 6; ++i) cols.push_back(p + std::to_string(i));
  for (const char* n : {"tau1", "tau2", "fx", "fy", "fz", "mx", "my", "mz", "s_c"})
    cols.emplace_back(n);
  return cols;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  tr.validate();
  const auto cols = trajectory_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  using detail::format_double;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    os << format_double(tr.t[k]);
    for (const auto* v : {&tr.c[k], &tr.cdot[k], &tr.cddot[k]})
      for (int i = 0; i < 6; ++i) os << ',' << format_double((*v)(i));
    os << ',' << format_double(tr.tau[k](0)) << ',' << format_double(tr.tau[k](1));
    const Vec6 w = tr.w_true[k].vec();
    for (int i = 0; i < 6; ++i) os << ',' << format_double(w(i));
    os << ',' << format_double(tr.s_c[k]) << '\n';
  }
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& tr) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_trajectory_csv(os, tr);
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline Trajectory read_trajectory_csv(std::istream& is, const std::string& name = "<stream>") {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError(name + ": empty trajectory file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv(line);
  const auto cols = trajectory_columns();
  if (header.size() != cols.size())
    throw ConfigError(name + ": expected " + std::to_string(cols.size()) + " columns, found " +
                      std::to_string(header.size()));
  for (std::size_t i = 0; i < cols.size(); ++i)
    if (header[i] != cols[i])
      throw ConfigError(name + ": column " + std::to_string(i + 1) + " should be '" + cols[i] +
                        "', found '" + std::string(header[i]) + "'");
  Trajectory tr;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_csv(line);
    const std::string where = name + ":" + std::to_string(row);
    if (f.size() != cols.size())
      throw ConfigError(where + ": expected " + std::to_string(cols.size()) + " fields");
    std::vector<double> v(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) v[i] = detail::parse_double(f[i], where);
    tr.t.push_back(v[0]);
    tr.c.push_back(Eigen::Map<const Vec6>(&v[1]));
    tr.cdot.push_back(Eigen::Map<const Vec6>(&v[7]));
    tr.cddot.push_back(Eigen::Map<const Vec6>(&v[13]));
    tr.tau.push_back(Vec2(v[19], v[20]));
    tr.w_true.push_back(Wrench::from(Eigen::Map<const Vec6>(&v[21])));
    tr.s_c.push_back(v[27]);
  }
  tr.validate();
  return tr;
}

inline Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open trajectory file " + path);
  return read_trajectory_csv(is, path);
}

}  // namespace cgmo
