#pragma once

// TOML configuration with unit suffixes. A quantity may be a bare number
// (already SI), a string "<number> <unit>", or a table {value = ..., unit = "..."}
// whose value is a number or a (nested) array of numbers.

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "cgmo/errors.hpp"
#include "cgmo/params.hpp"

namespace cgmo::config {

enum class Dim {
  None,
  Length,
  Mass,
  Force,
  Torque,
  Inertia,
  Rigidity,
  LinearDensity,
  Angle,
  Time,
  Frequency,
  Acceleration,
};

inline const char* dim_name(Dim d) {
  switch (d) {
    case Dim::None: return "dimensionless";
    case Dim::Length: return "length";
    case Dim::Mass: return "mass";
    case Dim::Force: return "force";
    case Dim::Torque: return "torque";
    case Dim::Inertia: return "moment of inertia";
    case Dim::Rigidity: return "flexural rigidity";
    case Dim::LinearDensity: return "mass per length";
    case Dim::Angle: return "angle";
    case Dim::Time: return "time";
    case Dim::Frequency: return "frequency";
    case Dim::Acceleration: return "acceleration";
  }
  return "?";
}

struct UnitInfo {
  Dim dim;
  double to_si;
};

inline const std::map<std::string, UnitInfo, std::less<>>& unit_table() {
  static const std::map<std::string, UnitInfo, std::less<>> t = {
      {"1", {Dim::None, 1.0}},          {"%", {Dim::None, 0.01}},
      {"m", {Dim::Length, 1.0}},        {"cm", {Dim::Length, 1e-2}},
      {"mm", {Dim::Length, 1e-3}},      {"kg", {Dim::Mass, 1.0}},
      {"g", {Dim::Mass, 1e-3}},         {"N", {Dim::Force, 1.0}},
      {"N*m", {Dim::Torque, 1.0}},      {"N*mm", {Dim::Torque, 1e-3}},
      {"kg*m^2", {Dim::Inertia, 1.0}},  {"g*m^2", {Dim::Inertia, 1e-3}},
      {"kg*mm^2", {Dim::Inertia, 1e-6}}, {"g*mm^2", {Dim::Inertia, 1e-9}},
      {"N*m^2", {Dim::Rigidity, 1.0}},  {"N*mm^2", {Dim::Rigidity, 1e-6}},
      {"kg/m", {Dim::LinearDensity, 1.0}}, {"g/m", {Dim::LinearDensity, 1e-3}},
      {"g/mm", {Dim::LinearDensity, 1.0}},
      {"rad", {Dim::Angle, 1.0}},       {"deg", {Dim::Angle, std::numbers::pi / 180.0}},
      {"s", {Dim::Time, 1.0}},          {"ms", {Dim::Time, 1e-3}},
      {"Hz", {Dim::Frequency, 1.0}},    {"1/s", {Dim::Frequency, 1.0}},
      {"m/s^2", {Dim::Acceleration, 1.0}},
  };
  return t;
}

inline double unit_factor(std::string_view unit, Dim want, const std::string& where) {
  const auto& t = unit_table();
  const auto it = t.find(unit);
  if (it == t.end())
    throw ConfigError(where + ": unknown unit '" + std::string(unit) + "'");
  if (it->second.dim != want)
    throw ConfigError(where + ": unit '" + std::string(unit) + "' is a " +
                      dim_name(it->second.dim) + ", expected a " + dim_name(want));
  return it->second.to_si;
}

namespace detail {

inline double number_of(const toml::node& n, const std::string& where) {
  if (auto v = n.value<double>()) return *v;
  throw ConfigError(where + ": expected a number");
}

/// "<number> <unit>" -> SI value.
inline double parse_quantity_string(std::string_view s, Dim want, const std::string& where) {
  std::string str(s);
  std::istringstream is(str);
  double v;
  if (!(is >> v)) throw ConfigError(where + ": cannot read a number from '" + str + "'");
  std::string unit;
  is >> unit;
  std::string extra;
  if (is >> extra) throw ConfigError(where + ": trailing text in '" + str + "'");
  if (unit.empty()) {
    if (want != Dim::None)
      throw ConfigError(where + ": '" + str + "' needs a unit (" + dim_name(want) + ")");
    return v;
  }
  return v * unit_factor(unit, want, where);
}

}  // namespace detail

/// Flatten a quantity node to SI numbers (a scalar gives one element).
inline std::vector<double> quantity_values(const toml::node& n, Dim want, const std::string& where) {
  std::vector<double> out;
  if (const auto* tbl = n.as_table()) {
    const auto* unit = tbl->get("unit");
    const auto* value = tbl->get("value");
    if (!value) throw ConfigError(where + ": quantity table needs 'value'");
    const double f = unit ? unit_factor(unit->value<std::string>().value_or("?"), want, where)
                          : (want == Dim::None ? 1.0 : throw ConfigError(where + ": quantity table needs 'unit'"));
    std::function<void(const toml::node&)> walk = [&](const toml::node& v) {
      if (const auto* arr = v.as_array()) {
        for (const auto& e : *arr) walk(e);
      } else {
        out.push_back(detail::number_of(v, where) * f);
      }
    };
    walk(*value);
    return out;
  }
  if (const auto* arr = n.as_array()) {
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const auto sub = quantity_values(*arr->get(i), want, where + "[" + std::to_string(i) + "]");
      out.insert(out.end(), sub.begin(), sub.end());
    }
    return out;
  }
  if (auto s = n.value<std::string>()) {
    out.push_back(detail::parse_quantity_string(*s, want, where));
    return out;
  }
  if (auto v = n.value<double>()) {
    out.push_back(*v);
    return out;
  }
  throw ConfigError(where + ": expected a quantity");
}

/// Table accessor that prefixes every error with the key path.
class Section {
 public:
  Section(const toml::table* t, std::string path) : t_(t), path_(std::move(path)) {}

  bool has(std::string_view key) const { return t_ && t_->contains(key); }
  const std::string& path() const { return path_; }

  std::string where(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  const toml::node& node(std::string_view key) const {
    const toml::node* n = t_ ? t_->get(key) : nullptr;
    if (!n) throw ConfigError("missing key '" + where(key) + "'");
    return *n;
  }

  double quantity(std::string_view key, Dim d) const {
    const auto v = quantity_values(node(key), d, where(key));
    if (v.size() != 1) throw ConfigError(where(key) + ": expected a scalar");
    return v[0];
  }
  double quantity(std::string_view key, Dim d, double fallback) const {
    return has(key) ? quantity(key, d) : fallback;
  }

  std::vector<double> quantities(std::string_view key, Dim d, std::size_t n) const {
    auto v = quantity_values(node(key), d, where(key));
    if (n && v.size() != n)
      throw ConfigError(where(key) + ": expected " + std::to_string(n) + " values, got " +
                        std::to_string(v.size()));
    return v;
  }

  /// A scalar broadcast to n entries or an n-vector.
  std::vector<double> broadcast(std::string_view key, Dim d, std::size_t n) const {
    auto v = quantity_values(node(key), d, where(key));
    if (v.size() == 1) return std::vector<double>(n, v[0]);
    if (v.size() != n)
      throw ConfigError(where(key) + ": expected a scalar or " + std::to_string(n) + " values");
    return v;
  }

  long integer(std::string_view key) const {
    if (auto v = node(key).value<int64_t>()) return static_cast<long>(*v);
    throw ConfigError(where(key) + ": expected an integer");
  }
  long integer(std::string_view key, long fallback) const { return has(key) ? integer(key) : fallback; }

  std::string string(std::string_view key) const {
    if (auto v = node(key).value<std::string>()) return *v;
    throw ConfigError(where(key) + ": expected a string");
  }
  std::string string(std::string_view key, const std::string& fallback) const {
    return has(key) ? string(key) : fallback;
  }

  bool boolean(std::string_view key, bool fallback) const {
    if (!has(key)) return fallback;
    if (auto v = node(key).value<bool>()) return *v;
    throw ConfigError(where(key) + ": expected true or false");
  }

  Section sub(std::string_view key) const {
    const toml::node* n = t_ ? t_->get(key) : nullptr;
    if (n && !n->is_table()) throw ConfigError(where(key) + ": expected a table");
    return Section(n ? n->as_table() : nullptr, where(key));
  }

  const toml::array* array(std::string_view key) const {
    const toml::node* n = t_ ? t_->get(key) : nullptr;
    if (!n) return nullptr;
    if (!n->is_array()) throw ConfigError(where(key) + ": expected an array");
    return n->as_array();
  }

 private:
  const toml::table* t_;
  std::string path_;
};

inline toml::table parse_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw ConfigError("config file not found: " + path.string());
  try {
    return toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << path.string() << ":" << e.source().begin.line << ":" << e.source().begin.column << ": "
       << e.description();
    throw ConfigError(os.str());
  }
}

inline toml::table parse_string(std::string_view text, const std::string& name = "<string>") {
  try {
    return toml::parse(text, name);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << name << ":" << e.source().begin.line << ": " << e.description();
    throw ConfigError(os.str());
  }
}

inline Vec3 vec3(const std::vector<double>& v) { return Vec3(v[0], v[1], v[2]); }

/// Segment file layout:
///   [segment]   L, r_c, lead, rho, r, JG, J_A, f_pl, gravity, EI_x, EI_y, mu1, mu2, n_sub
///   [[disk]]    s, m, I (3x3), p_cm (3)
///   [[channel]] radius, angle, s_start, s_end, passes   (6 entries, optional)
inline SegmentParams segment_from_toml(const toml::table& root) {
  const Section s(root.get_as<toml::table>("segment"), "segment");
  if (!root.contains("segment")) throw ConfigError("missing table [segment]");
  SegmentParams p;
  p.L = s.quantity("L", Dim::Length);
  p.r_c = s.quantity("r_c", Dim::Length);
  p.lead = s.quantity("lead", Dim::Length, 0.0);
  p.rho = s.quantity("rho", Dim::LinearDensity);
  p.r = s.quantity("r", Dim::Length);
  p.JG = s.quantity("JG", Dim::Rigidity, 1.0);
  p.J_A = s.quantity("J_A", Dim::Inertia);
  p.f_pl = s.quantity("f_pl", Dim::Force);
  p.g = vec3(s.quantities("gravity", Dim::Acceleration, 3));
  p.EI_x = s.quantity("EI_x", Dim::Rigidity);
  p.EI_y = s.quantity("EI_y", Dim::Rigidity);
  p.mu1 = s.quantity("mu1", Dim::None);
  p.mu2 = s.quantity("mu2", Dim::None);
  p.n_sub = static_cast<int>(s.integer("n_sub", ModalKinematics::kDefaultSubdivisions));

  const Section top(&root, "");
  const toml::array* disks = top.array("disk");
  if (!disks || disks->empty()) throw ConfigError("at least one [[disk]] entry is required");
  for (std::size_t i = 0; i < disks->size(); ++i) {
    const auto* t = disks->get(i)->as_table();
    if (!t) throw ConfigError("disk[" + std::to_string(i) + "] must be a table");
    const Section d(t, "disk[" + std::to_string(i) + "]");
    p.s_d.push_back(d.quantity("s", Dim::Length));
    p.m_d.push_back(d.quantity("m", Dim::Mass));
    const auto I = d.quantities("I", Dim::Inertia, 9);
    Mat3 M;
    M << I[0], I[1], I[2], I[3], I[4], I[5], I[6], I[7], I[8];
    p.I_d.push_back(M);
    p.p_cm.push_back(vec3(d.quantities("p_cm", Dim::Length, 3)));
  }

  const toml::array* ch = top.array("channel");
  if (ch) {
    if (ch->size() != 6) throw ConfigError("exactly 6 [[channel]] entries are required (4 strings, 2 tendons)");
    for (std::size_t i = 0; i < 6; ++i) {
      const auto* t = ch->get(i)->as_table();
      if (!t) throw ConfigError("channel[" + std::to_string(i) + "] must be a table");
      const Section c(t, "channel[" + std::to_string(i) + "]");
      RoutingChannel rc;
      rc.pitch_radius = c.quantity("radius", Dim::Length);
      rc.angle = c.quantity("angle", Dim::Angle);
      rc.s_start = c.quantity("s_start", Dim::Length, 0.0);
      rc.s_end = c.quantity("s_end", Dim::Length, p.L);
      rc.passes = static_cast<int>(c.integer("passes", 1));
      p.routing.channels[i] = rc;
    }
  } else {
    if (p.s_d.size() < 2) throw ConfigError("default routing needs at least two disks");
    p.routing = default_routing(p.L, p.s_d);
  }
  p.validate();
  return p;
}

inline SegmentParams load_segment(const std::filesystem::path& path) {
  try {
    return segment_from_toml(parse_file(path));
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path.string(), 0) == 0) throw;
    throw ConfigError(path.string() + ": " + msg);
  }
}

}  // namespace cgmo::config
