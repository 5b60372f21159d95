// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "metasurf/types.hpp"

namespace metasurf {

using Vec3 = std::array<double, 3>;

/// Scalar link-budget parameters shared by every link of a scene.
struct SceneMeta {
  std::size_t num_ues = 1;       // K
  std::size_t num_surfaces = 0;  // L
  std::size_t bs_antennas = 1;   // N
  std::size_t surface_elements = 1;  // M
  double bandwidth_hz = 1e9;
  double tx_power_watt = 1.0;
  double noise_psd_watt_per_hz = 0.0;
  double carrier_freq_hz = 28e9;

  /// P / (B N0): converts |v|^2 into SNR.
  double snr_scale() const { return tx_power_watt / (bandwidth_hz * noise_psd_watt_per_hz); }
  double wavelength() const;
};

/// One end of a link, used to flag blockage.
struct LinkEnd {
  enum class Kind { Bs, Surface, Ue };
  Kind kind = Kind::Bs;
  std::size_t index = 0;

  static LinkEnd parse(const std::string& text);
  std::string to_string() const;
  friend bool operator==(const LinkEnd&, const LinkEnd&) = default;
};

struct Blockage {
  LinkEnd a;
  LinkEnd b;
};

struct SurfacePlacement {
  Vec3 position{};
  Vec3 normal{1.0, 0.0, 0.0};  // reflecting side
};

struct SceneConfig {
  std::size_t num_ues = 1;
  std::size_t num_surfaces = 0;
  std::size_t bs_antennas = 1;
  std::size_t surface_elements = 1;
  double carrier_freq_hz = 28e9;
  double bandwidth_hz = 1e9;
  double tx_power_watt = 1.0;
  /// Thermal noise PSD before the noise figure; -174 dBm/Hz.
  double noise_psd_watt_per_hz = 3.981071705534973e-21;
  double noise_figure_db = 0.0;

  Vec3 bs_position{};
  Vec3 bs_normal{0.0, 0.0, -1.0};
  std::vector<SurfacePlacement> surfaces;
  std::vector<Vec3> ues;
  std::vector<Blockage> blockages;

  double blockage_db = 40.0;
  double bs_spacing_wavelengths = 0.5;
  double element_spacing_wavelengths = 0.25;
  /// Uniform per-element phase error in [-jitter, jitter] rad drawn from the seed.
  double phase_jitter_rad = 0.0;

  /// Effective N0 including the noise figure.
  double effective_noise_psd() const;
  SceneMeta meta() const;
  /// Throws ConfigError naming the first violated field.
  void validate() const;
  bool is_blocked(const LinkEnd& a, const LinkEnd& b) const;
};

/// Deterministic channels of one scene plus the derived cascades. Immutable.
class ChannelSet {
 public:
  ChannelSet() = default;

  /// Validates dimensions and finiteness, then builds H_{l,k} and the stacked H_k.
  /// `g` is indexed [l][k].
  static ChannelSet assemble(const SceneMeta& meta, std::vector<CVector> h, std::vector<CMatrix> G,
                             std::vector<std::vector<CVector>> g);

  const SceneMeta& meta() const { return meta_; }
  std::size_t num_ues() const { return meta_.num_ues; }
  std::size_t num_surfaces() const { return meta_.num_surfaces; }
  std::size_t bs_antennas() const { return meta_.bs_antennas; }
  std::size_t surface_elements() const { return meta_.surface_elements; }

  const CVector& direct(std::size_t k) const { return h_.at(k); }
  const CMatrix& bs_to_surface(std::size_t l) const { return G_.at(l); }
  const CVector& surface_to_ue(std::size_t l, std::size_t k) const { return g_.at(l).at(k); }
  const CMatrix& cascade(std::size_t l, std::size_t k) const { return H_.at(l).at(k); }
  /// N x (L M) block row [H_{1,k} ... H_{L,k}].
  const CMatrix& stacked(std::size_t k) const { return stacked_.at(k); }

  friend bool operator==(const ChannelSet& a, const ChannelSet& b);

 private:
  SceneMeta meta_;
  std::vector<CVector> h_;
  std::vector<CMatrix> G_;
  std::vector<std::vector<CVector>> g_;
  std::vector<std::vector<CMatrix>> H_;
  std::vector<CMatrix> stacked_;
};

/// transpose(G) * diag(g), N x M.
CMatrix aggregate_cascade(const CMatrix& G, const CVector& g);

/// Element offsets of a side x side UPA centered at the origin, in the plane
/// orthogonal to `normal`, row-major.
std::vector<Vec3> upa_offsets(std::size_t elements, double spacing_m, const Vec3& normal);

/// Line-of-sight synthetic channels: free-space pathloss, cosine surface
/// elements, plane-wave UPA phases, fixed-dB blockage. Pure in (cfg, seed).
ChannelSet synthesize_channels(const SceneConfig& cfg, std::uint64_t seed);

SceneConfig scene_from_json_text(const std::string& text);

ChannelSet load_channels(const std::filesystem::path& path);
ChannelSet channels_from_json_text(const std::string& text);
void save_channels(const ChannelSet& channels, const std::filesystem::path& path);
std::string channels_to_json_text(const ChannelSet& channels);

}  // namespace metasurf
