// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include <metasurf/channel.hpp>
#include <metasurf/json_io.hpp>

#include "oracles/random_scenes.hpp"

namespace metasurf {
namespace {

constexpr double kPi = std::numbers::pi;

SceneConfig single_link_scene(double distance) {
  SceneConfig cfg;
  cfg.num_ues = 1;
  cfg.bs_antennas = 1;
  cfg.bs_position = {0.0, 0.0, 0.0};
  cfg.ues = {{distance, 0.0, 0.0}};
  return cfg;
}

/// K=2, L=1, N=4, M=4 room with one blocked direct link.
SceneConfig small_desk() {
  SceneConfig cfg;
  cfg.num_ues = 2;
  cfg.num_surfaces = 1;
  cfg.bs_antennas = 4;
  cfg.surface_elements = 4;
  cfg.bs_position = {0.2, 1.5, 2.3};
  cfg.bs_normal = {1.0, 0.0, 0.0};
  cfg.surfaces = {{{2.0, 0.02, 1.8}, {0.0, 1.0, 0.0}}};
  cfg.ues = {{1.6, 0.7, 1.0}, {3.6, 2.3, 1.0}};
  cfg.blockages = {{LinkEnd::parse("bs"), LinkEnd::parse("ue:1")}};
  return cfg;
}

double distance(const Vec3& a, const Vec3& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
}

double cosine(const Vec3& normal, const Vec3& from, const Vec3& to) {
  const double d = distance(from, to);
  const double n = std::hypot(normal[0], normal[1], normal[2]);
  return ((to[0] - from[0]) * normal[0] + (to[1] - from[1]) * normal[1] + (to[2] - from[2]) * normal[2]) / (d * n);
}

TEST(Synthesize, UnitPathlossDistanceGivesUnitModulus) {
  const double lambda = 299792458.0 / 28e9;
  const auto ch = synthesize_channels(single_link_scene(lambda / (4.0 * kPi)), 1);
  ASSERT_EQ(ch.direct(0).size(), 1);
  EXPECT_NEAR(std::abs(ch.direct(0)[0]), 1.0, 1e-12);
  // Phase -2 pi d / lambda = -1/2.
  EXPECT_NEAR(std::arg(ch.direct(0)[0]), -0.5, 1e-12);
  EXPECT_EQ(ch.stacked(0).cols(), 0);
}

TEST(Synthesize, UeBehindSurfaceSeesNothing) {
  SceneConfig cfg = small_desk();
  cfg.ues[1] = {3.6, -0.5, 1.0};  // behind the wall surface
  const auto ch = synthesize_channels(cfg, 1);
  EXPECT_EQ(ch.surface_to_ue(0, 1).norm(), 0.0);
  EXPECT_EQ(ch.cascade(0, 1).norm(), 0.0);
  EXPECT_GT(ch.surface_to_ue(0, 0).norm(), 0.0);
}

TEST(Synthesize, AmplitudesMatchStraightLinePathloss) {
  const SceneConfig cfg = small_desk();
  const auto ch = synthesize_channels(cfg, 5);
  const double lambda = 299792458.0 / cfg.carrier_freq_hz;
  const double fspl = lambda / (4.0 * kPi);
  const double blocked = std::pow(10.0, -cfg.blockage_db / 20.0);
  for (std::size_t k = 0; k < 2; ++k) {
    const double want = fspl / distance(cfg.bs_position, cfg.ues[k]) * (k == 1 ? blocked : 1.0);
    for (Eigen::Index n = 0; n < 4; ++n) EXPECT_NEAR(std::abs(ch.direct(k)[n]) / want, 1.0, 1e-12);
  }
  const auto& s = cfg.surfaces[0];
  const double g_in = fspl / distance(cfg.bs_position, s.position) * -cosine(s.normal, cfg.bs_position, s.position);
  for (Eigen::Index m = 0; m < 4; ++m) {
    for (Eigen::Index n = 0; n < 4; ++n) EXPECT_NEAR(std::abs(ch.bs_to_surface(0)(m, n)) / g_in, 1.0, 1e-12);
  }
  for (std::size_t k = 0; k < 2; ++k) {
    const double g_out = fspl / distance(s.position, cfg.ues[k]) * cosine(s.normal, s.position, cfg.ues[k]);
    for (Eigen::Index m = 0; m < 4; ++m) EXPECT_NEAR(std::abs(ch.surface_to_ue(0, k)[m]) / g_out, 1.0, 1e-12);
  }
}

TEST(Synthesize, BlockageIsAFixedAttenuation) {
  SceneConfig open = small_desk();
  open.blockages.clear();
  SceneConfig blocked = small_desk();
  blocked.blockage_db = 25.0;
  const auto a = synthesize_channels(open, 1);
  const auto b = synthesize_channels(blocked, 1);
  EXPECT_NEAR(b.direct(1).norm() / a.direct(1).norm(), std::pow(10.0, -25.0 / 20.0), 1e-12);
  EXPECT_EQ(b.direct(0), a.direct(0));
}

TEST(Synthesize, PureInConfigAndSeed) {
  SceneConfig cfg = small_desk();
  cfg.phase_jitter_rad = 0.1;
  EXPECT_TRUE(synthesize_channels(cfg, 3) == synthesize_channels(cfg, 3));
  EXPECT_FALSE(synthesize_channels(cfg, 3) == synthesize_channels(cfg, 4));
  cfg.phase_jitter_rad = 0.0;
  EXPECT_TRUE(synthesize_channels(cfg, 3) == synthesize_channels(cfg, 4));
}

TEST(Synthesize, RejectsCoincidentPositions) {
  SceneConfig cfg = small_desk();
  cfg.ues[0] = cfg.bs_position;
  EXPECT_THROW(synthesize_channels(cfg, 1), ConfigError);
}

TEST(SceneConfig, ValidationNamesTheField) {
  SceneConfig cfg = small_desk();
  cfg.bs_antennas = 3;
  try {
    cfg.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bs_antennas"), std::string::npos);
  }
  EXPECT_THROW(LinkEnd::parse("satellite:1"), ConfigError);
  EXPECT_THROW(LinkEnd::parse("ue:x"), ConfigError);
  EXPECT_EQ(LinkEnd::parse("surface:3").to_string(), "surface:3");
}

TEST(SceneConfig, JsonRoundTrip) {
  const SceneConfig cfg = small_desk();
  const SceneConfig back = scene_from_json(scene_to_json(cfg));
  EXPECT_TRUE(synthesize_channels(cfg, 2) == synthesize_channels(back, 2));
  auto j = scene_to_json(cfg);
  j["num_ues"] = 5;
  EXPECT_THROW(scene_from_json(j), ConfigError);
}

TEST(SceneConfig, MinimalJsonScene) {
  const auto ch = synthesize_channels(
      scene_from_json_text(R"({"ues": [[1, 1, 1]], "bs_antennas": 1, "bs": {"position": [0, 0, 2]}})"), 1);
  EXPECT_EQ(ch.num_ues(), 1u);
  EXPECT_EQ(ch.num_surfaces(), 0u);
}

TEST(SceneConfig, ShippedDeskSceneHasTheDocumentedShape) {
  std::ifstream in(std::filesystem::path(METASURF_SCENE_DIR) / "desk.json");
  ASSERT_TRUE(in);
  std::stringstream buf;
  buf << in.rdbuf();
  const auto ch = synthesize_channels(scene_from_json_text(buf.str()), 1);
  EXPECT_EQ(ch.num_ues(), 8u);
  EXPECT_EQ(ch.num_surfaces(), 6u);
  EXPECT_EQ(ch.bs_antennas(), 4u);
  EXPECT_EQ(ch.surface_elements(), 4u);
}

TEST(LoadChannels, MinimalFile) {
  const auto ch = channels_from_json_text(
      R"({"meta": {"K": 1, "L": 0, "N": 1, "M": 1, "B": 1, "P": 1, "N0": 1, "carrier": 28e9},
          "h": [[[1, 0]]], "G": [], "g": []})");
  EXPECT_EQ(ch.direct(0)[0], Complex(1.0, 0.0));
  EXPECT_EQ(ch.stacked(0).cols(), 0);
  EXPECT_EQ(ch.stacked(0).rows(), 1);
}

TEST(LoadChannels, RejectsMismatchedSurfaceVector) {
  EXPECT_THROW(channels_from_json_text(
                   R"({"meta": {"K": 1, "L": 1, "N": 1, "M": 1, "B": 1, "P": 1, "N0": 1, "carrier": 28e9},
                       "h": [[[1, 0]]], "G": [[[[1, 0]]]], "g": [[[[1, 0], [0, 1]]]]})"),
               DimensionError);
  EXPECT_THROW(channels_from_json_text(R"({"meta": {"K": 1}})"), ConfigError);
}

TEST(LoadChannels, MissingFileMessageContainsPath) {
  const std::filesystem::path p = "/nonexistent/dir/channels.json";
  try {
    load_channels(p);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(p.string()), std::string::npos);
  }
}

TEST(LoadChannels, SaveLoadRoundTripIsBitwise) {
  SceneConfig cfg = small_desk();
  cfg.phase_jitter_rad = 0.3;
  const auto ch = synthesize_channels(cfg, 7);
  const auto path = std::filesystem::temp_directory_path() / "metasurf_channel_roundtrip.json";
  save_channels(ch, path);
  const auto back = load_channels(path);
  std::filesystem::remove(path);
  EXPECT_TRUE(back == ch);
}

TEST(AggregateCascade, Examples) {
  CMatrix G(1, 1);
  G << 2.0;
  CVector g(1);
  g << 3.0;
  EXPECT_EQ(aggregate_cascade(G, g)(0, 0), Complex(6.0, 0.0));
  std::mt19937_64 rng(1);
  const CMatrix R = testing::random_cmatrix(rng, 4, 2);
  EXPECT_EQ(aggregate_cascade(R, CVector::Zero(4)).norm(), 0.0);
  const CVector v = testing::random_cvector(rng, 4);
  const CMatrix H = aggregate_cascade(R, v);
  ASSERT_EQ(H.rows(), 2);
  ASSERT_EQ(H.cols(), 4);
  for (Eigen::Index n = 0; n < 2; ++n) {
    for (Eigen::Index m = 0; m < 4; ++m) EXPECT_EQ(H(n, m), R(m, n) * v[m]);
  }
  EXPECT_THROW(aggregate_cascade(R, CVector::Zero(3)), DimensionError);
}

TEST(ChannelSetInvariants, CascadeBoundsLinearityAndStacking) {
  std::mt19937_64 rng(11);
  const auto ch = testing::random_channels(rng, 3, 2, 4, 4);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t l = 0; l < 2; ++l) {
      const CMatrix& H = ch.cascade(l, k);
      const double bound =
          ch.bs_to_surface(l).norm() * ch.surface_to_ue(l, k).cwiseAbs().maxCoeff();
      for (Eigen::Index m = 0; m < H.cols(); ++m) EXPECT_LE(H.col(m).norm(), bound * (1.0 + 1e-15));
      EXPECT_EQ(ch.stacked(k).middleCols(static_cast<Eigen::Index>(l) * 4, 4), H);
      EXPECT_EQ(H, aggregate_cascade(ch.bs_to_surface(l), ch.surface_to_ue(l, k)));
    }
  }
  // Power-of-two scaling is exact in floating point.
  const Complex c(2.0, 0.0);
  const CVector g = ch.surface_to_ue(0, 0);
  EXPECT_EQ(aggregate_cascade(ch.bs_to_surface(0), c * g), c * aggregate_cascade(ch.bs_to_surface(0), g));
  const Complex j(0.0, 1.0);
  EXPECT_EQ(aggregate_cascade(ch.bs_to_surface(0), j * g), j * ch.cascade(0, 0));
}

}  // namespace
}  // namespace metasurf
