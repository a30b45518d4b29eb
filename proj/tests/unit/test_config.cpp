#include <filesystem>
#include <fstream>
#include <numbers>

#include <gtest/gtest.h>

#include "cgmo/config.hpp"
#include "cgmo/params.hpp"
#include "cgmo/scenario_config.hpp"

using namespace cgmo;
using namespace cgmo::config;
namespace fs = std::filesystem;

namespace {

const fs::path kData = CGMO_DATA_DIR;

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

// Temporary directory holding a scenario next to a copy of the distal segment.
struct ScenarioDir {
  fs::path dir;
  explicit ScenarioDir(const std::string& name) {
    dir = fs::temp_directory_path() / ("cgmo_config_" + name);
    fs::create_directories(dir);
    fs::copy_file(kData / "distal.toml", dir / "seg.toml", fs::copy_options::overwrite_existing);
  }
  ~ScenarioDir() { fs::remove_all(dir); }
  fs::path write(const std::string& text) const {
    const fs::path p = dir / "scenario.toml";
    std::ofstream(p) << text;
    return p;
  }
};

}  // namespace

TEST(Units, ConvertsToSi) {
  EXPECT_DOUBLE_EQ(unit_factor("mm", Dim::Length, "x"), 1e-3);
  EXPECT_DOUBLE_EQ(unit_factor("g*m^2", Dim::Inertia, "x"), 1e-3);
  EXPECT_DOUBLE_EQ(unit_factor("deg", Dim::Angle, "x"), std::numbers::pi / 180.0);
  const auto t = parse_string(R"(
a = "300.65 mm"
b = { value = [1.0, 2.0], unit = "g" }
c = 2.5
d = ["1 cm", "2 mm"]
)");
  EXPECT_NEAR(quantity_values(*t.get("a"), Dim::Length, "a")[0], 0.30065, 1e-15);
  EXPECT_EQ(quantity_values(*t.get("b"), Dim::Mass, "b"), (std::vector<double>{1e-3, 2e-3}));
  EXPECT_EQ(quantity_values(*t.get("c"), Dim::Force, "c")[0], 2.5);  // bare numbers are SI
  const auto d = quantity_values(*t.get("d"), Dim::Length, "d");
  EXPECT_NEAR(d[0], 0.01, 1e-15);
  EXPECT_NEAR(d[1], 0.002, 1e-15);
}

TEST(Units, ReportsKeyAndDimension) {
  const auto t = parse_string("x = \"3 kg\"\ny = \"3 furlongs\"\nz = \"3 mm extra\"\nw = \"5\"\n");
  EXPECT_EQ(error_of([&] { quantity_values(*t.get("x"), Dim::Length, "seg.x"); }),
            "seg.x: unit 'kg' is a mass, expected a length");
  EXPECT_NE(error_of([&] { quantity_values(*t.get("y"), Dim::Length, "y"); }).find("unknown unit"),
            std::string::npos);
  EXPECT_NE(error_of([&] { quantity_values(*t.get("z"), Dim::Length, "z"); }).find("trailing"),
            std::string::npos);
  EXPECT_NE(error_of([&] { quantity_values(*t.get("w"), Dim::Length, "w"); }).find("needs a unit"),
            std::string::npos);
  EXPECT_THROW(parse_string("a = [1,"), ConfigError);
}

TEST(SegmentFile, DistalMatchesBuiltInParameters) {
  const SegmentParams a = load_segment(kData / "distal.toml");
  const SegmentParams b = distal_segment();
  for (auto [x, y] : {std::pair{a.L, b.L}, {a.r_c, b.r_c}, {a.lead, b.lead}, {a.rho, b.rho}, {a.r, b.r},
                      {a.J_A, b.J_A}, {a.f_pl, b.f_pl}, {a.EI_x, b.EI_x}, {a.EI_y, b.EI_y},
                      {a.mu1, b.mu1}, {a.mu2, b.mu2}})
    EXPECT_LT(rel(x, y), 1e-12);
  EXPECT_LT((a.g - b.g).norm(), 1e-15);
  ASSERT_EQ(a.n_d(), b.n_d());
  for (int i = 0; i < a.n_d(); ++i) {
    EXPECT_LT(rel(a.s_d[i], b.s_d[i]), 1e-12);
    EXPECT_LT(rel(a.m_d[i], b.m_d[i]), 1e-12);
    EXPECT_LT((a.I_d[i] - b.I_d[i]).norm(), 1e-15);
    EXPECT_LT((a.p_cm[i] - b.p_cm[i]).norm(), 1e-15);
  }
  for (int i = 0; i < 6; ++i) {
    EXPECT_LT(std::abs(a.routing.channels[i].pitch_radius - b.routing.channels[i].pitch_radius), 1e-15);
    EXPECT_EQ(a.routing.channels[i].passes, b.routing.channels[i].passes);
  }
}

TEST(SegmentFile, ProximalLoads) {
  const SegmentParams p = load_segment(kData / "proximal.toml");
  EXPECT_LT(rel(p.L, proximal_segment().L), 1e-12);
}

TEST(SegmentFile, RejectsWrongUnitsWithPath) {
  const std::string msg = error_of([] { load_segment(fs::path(CGMO_DATA_DIR) / "../tests/data/bad_segment.toml"); });
  EXPECT_NE(msg.find("bad_segment.toml"), std::string::npos) << msg;
  EXPECT_NE(msg.find("segment.L: unit 'kg' is a mass, expected a length"), std::string::npos) << msg;
}

TEST(SegmentFile, RejectsMissingPieces) {
  EXPECT_THROW(segment_from_toml(parse_string("[other]\nx = 1\n")), ConfigError);
  const std::string no_disks = R"(
[segment]
L = "300 mm"
r_c = "15 mm"
rho = "80 g/m"
r = "2 mm"
J_A = "14 g*m^2"
f_pl = "200 N"
gravity = { value = [0, 0, -9.81], unit = "m/s^2" }
EI_x = "1 N*m^2"
EI_y = "1 N*m^2"
mu1 = 0.0
mu2 = 0.0
)";
  EXPECT_NE(error_of([&] { segment_from_toml(parse_string(no_disks)); }).find("[[disk]]"), std::string::npos);
}

TEST(Scenario, ShippedConfigsLoad) {
  for (const char* name : {"simulate.toml", "noise_study.toml", "sweep.toml", "multiseg.toml", "calibration.toml"}) {
    SCOPED_TRACE(name);
    const ScenarioConfig cfg = load_scenario(kData / name);
    EXPECT_TRUE(cfg.kind.has_value());
    EXPECT_TRUE(fs::exists(cfg.segment));
  }
  EXPECT_TRUE(load_scenario(kData / "noise_study.toml").seed.has_value());
  EXPECT_TRUE(load_scenario(kData / "sweep.toml").seed.has_value());
  const ScenarioConfig sim = load_scenario(kData / "simulate.toml");
  EXPECT_EQ(*sim.kind, ScenarioKind::NoiselessOracle);
  EXPECT_EQ(sim.simulate.wrench(0), 10.0);
  EXPECT_EQ(sim.simulate.wrench(1), -10.0);
  EXPECT_TRUE(sim.estimator.gmo.gains.isApprox(Vec6::Constant(10.0)));
}

TEST(Scenario, PathsResolveRelativeToConfig) {
  ScenarioDir d("paths");
  const ScenarioConfig cfg = load_scenario(d.write("scenario = \"noise-study\"\nsegment = \"seg.toml\"\nout = \"res\"\n"));
  EXPECT_EQ(fs::weakly_canonical(cfg.segment), fs::weakly_canonical(d.dir / "seg.toml"));
  EXPECT_EQ(fs::weakly_canonical(*cfg.out), fs::weakly_canonical(d.dir / "res"));
  EXPECT_FALSE(cfg.seed.has_value());
  EXPECT_THROW(cfg.require_seed("noise study"), ConfigError);
}

TEST(Scenario, ReadsTablesWithUnits) {
  ScenarioDir d("tables");
  const ScenarioConfig cfg = load_scenario(d.write(R"(
scenario = "noise-study"
segment = "seg.toml"
seed = 7

[estimator]
gain = "20 1/s"

[noise_study]
force = ["5 N", "-2 N"]
amplitudes = [0.0, 0.005]
smoothing_window = 4
noise = "gaussian"
)"));
  EXPECT_EQ(cfg.require_seed("x"), 7u);
  EXPECT_TRUE(cfg.estimator.gmo.gains.isApprox(Vec6::Constant(20.0)));
  EXPECT_EQ(cfg.noise_study.force, Eigen::Vector2d(5.0, -2.0));
  EXPECT_EQ(cfg.noise_study.amplitudes, (std::vector<double>{0.0, 0.005}));
  EXPECT_EQ(cfg.noise_study.smoothing_window, 4);
  EXPECT_EQ(cfg.noise_study.noise_kind, NoiseKind::Gaussian);
}

TEST(Scenario, RejectsBadInput) {
  ScenarioDir d("bad");
  EXPECT_NE(error_of([&] { load_scenario(d.write("scenario = \"bogus\"\nsegment = \"seg.toml\"\n")); })
                .find("unknown kind 'bogus'"),
            std::string::npos);
  EXPECT_NE(error_of([&] { load_scenario(d.write("segment = \"missing.toml\"\n")); }).find("segment"),
            std::string::npos);
  EXPECT_NE(error_of([&] { load_scenario(d.write("segment = \"seg.toml\"\nseed = -1\n")); }).find("seed"),
            std::string::npos);
  const std::string msg =
      error_of([&] { load_scenario(d.write("segment = \"seg.toml\"\n[simulate]\nduration = \"2 mm\"\n")); });
  EXPECT_NE(msg.find("simulate.duration"), std::string::npos) << msg;
  EXPECT_NE(msg.find("scenario.toml"), std::string::npos) << msg;
}
