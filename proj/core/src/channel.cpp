// SPDX-License-Identifier: Apache-2.0
#include "metasurf/channel.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace metasurf {
namespace {

constexpr double kSpeedOfLight = 299792458.0;

bool is_perfect_square(std::size_t n) {
  const auto root = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  return root * root == n;
}

bool all_finite(const CMatrix& m) {
  return m.real().allFinite() && m.imag().allFinite();
}

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

Vec3 scale(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

Vec3 normalized(const Vec3& a, const char* what) {
  const double n = norm(a);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw ConfigError(std::string(what) + ": zero or non-finite direction vector");
  }
  return scale(a, 1.0 / n);
}

struct Link {
  double distance;
  Vec3 direction;  // unit, from transmitter to receiver
};

Link make_link(const Vec3& from, const Vec3& to, const std::string& label) {
  const Vec3 delta = sub(to, from);
  const double d = norm(delta);
  if (!(d > 0.0)) {
    throw ConfigError(label + ": coincident transmitter and receiver positions");
  }
  return {d, scale(delta, 1.0 / d)};
}

}  // namespace

double SceneMeta::wavelength() const { return kSpeedOfLight / carrier_freq_hz; }

LinkEnd LinkEnd::parse(const std::string& text) {
  if (text == "bs") {
    return {Kind::Bs, 0};
  }
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw ConfigError("blockage endpoint '" + text + "': expected bs, surface:<i> or ue:<k>");
  }
  const std::string head = text.substr(0, colon);
  std::size_t index = 0;
  try {
    std::size_t used = 0;
    index = std::stoul(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) {
      throw std::invalid_argument("trailing");
    }
  } catch (const std::exception&) {
    throw ConfigError("blockage endpoint '" + text + "': bad index");
  }
  if (head == "surface") {
    return {Kind::Surface, index};
  }
  if (head == "ue") {
    return {Kind::Ue, index};
  }
  throw ConfigError("blockage endpoint '" + text + "': unknown kind '" + head + "'");
}

std::string LinkEnd::to_string() const {
  switch (kind) {
    case Kind::Bs:
      return "bs";
    case Kind::Surface:
      return "surface:" + std::to_string(index);
    case Kind::Ue:
      return "ue:" + std::to_string(index);
  }
  return "?";
}

double SceneConfig::effective_noise_psd() const {
  return noise_psd_watt_per_hz * std::pow(10.0, noise_figure_db / 10.0);
}

SceneMeta SceneConfig::meta() const {
  SceneMeta m;
  m.num_ues = num_ues;
  m.num_surfaces = num_surfaces;
  m.bs_antennas = bs_antennas;
  m.surface_elements = surface_elements;
  m.bandwidth_hz = bandwidth_hz;
  m.tx_power_watt = tx_power_watt;
  m.noise_psd_watt_per_hz = effective_noise_psd();
  m.carrier_freq_hz = carrier_freq_hz;
  return m;
}

void SceneConfig::validate() const {
  if (num_ues < 1) throw ConfigError("num_ues: must be >= 1");
  if (bs_antennas < 1 || !is_perfect_square(bs_antennas)) {
    throw ConfigError("bs_antennas: must be a positive perfect square");
  }
  if (surface_elements < 1 || !is_perfect_square(surface_elements)) {
    throw ConfigError("surface_elements: must be a positive perfect square");
  }
  auto positive = [](double v, const char* field) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(field) + ": must be finite and > 0");
  };
  positive(carrier_freq_hz, "carrier_freq_hz");
  positive(bandwidth_hz, "bandwidth_hz");
  positive(tx_power_watt, "tx_power_watt");
  positive(noise_psd_watt_per_hz, "noise_psd_watt_per_hz");
  positive(bs_spacing_wavelengths, "bs_spacing_wavelengths");
  positive(element_spacing_wavelengths, "element_spacing_wavelengths");
  if (!std::isfinite(noise_figure_db)) throw ConfigError("noise_figure_db: must be finite");
  if (!std::isfinite(blockage_db) || blockage_db < 0.0) throw ConfigError("blockage_db: must be >= 0");
  if (!std::isfinite(phase_jitter_rad) || phase_jitter_rad < 0.0) {
    throw ConfigError("phase_jitter_rad: must be >= 0");
  }
  if (ues.size() != num_ues) throw ConfigError("ues: expected num_ues positions");
  if (surfaces.size() != num_surfaces) throw ConfigError("surfaces: expected num_surfaces placements");
  for (const auto& b : blockages) {
    for (const auto& end : {b.a, b.b}) {
      if (end.kind == LinkEnd::Kind::Surface && end.index >= num_surfaces) {
        throw ConfigError("blockages: " + end.to_string() + " out of range");
      }
      if (end.kind == LinkEnd::Kind::Ue && end.index >= num_ues) {
        throw ConfigError("blockages: " + end.to_string() + " out of range");
      }
    }
  }
}

bool SceneConfig::is_blocked(const LinkEnd& a, const LinkEnd& b) const {
  for (const auto& blk : blockages) {
    if ((blk.a == a && blk.b == b) || (blk.a == b && blk.b == a)) return true;
  }
  return false;
}

ChannelSet ChannelSet::assemble(const SceneMeta& meta, std::vector<CVector> h, std::vector<CMatrix> G,
                                std::vector<std::vector<CVector>> g) {
  const std::size_t K = meta.num_ues;
  const std::size_t L = meta.num_surfaces;
  const std::size_t N = meta.bs_antennas;
  const std::size_t M = meta.surface_elements;
  if (K < 1 || N < 1 || M < 1) throw DimensionError("meta: K, N and M must be >= 1");
  if (h.size() != K) throw DimensionError("h: expected K direct channels");
  for (std::size_t k = 0; k < K; ++k) {
    if (static_cast<std::size_t>(h[k].size()) != N) {
      throw DimensionError("h[" + std::to_string(k) + "]: expected length N");
    }
    if (!all_finite(h[k])) throw DimensionError("h[" + std::to_string(k) + "]: non-finite entry");
  }
  if (G.size() != L) throw DimensionError("G: expected L matrices");
  if (g.size() != L) throw DimensionError("g: expected L surface groups");
  for (std::size_t l = 0; l < L; ++l) {
    if (static_cast<std::size_t>(G[l].rows()) != M || static_cast<std::size_t>(G[l].cols()) != N) {
      throw DimensionError("G[" + std::to_string(l) + "]: expected M x N");
    }
    if (!all_finite(G[l])) throw DimensionError("G[" + std::to_string(l) + "]: non-finite entry");
    if (g[l].size() != K) throw DimensionError("g[" + std::to_string(l) + "]: expected K vectors");
    for (std::size_t k = 0; k < K; ++k) {
      if (static_cast<std::size_t>(g[l][k].size()) != M) {
        throw DimensionError("g[" + std::to_string(l) + "][" + std::to_string(k) + "]: expected length M");
      }
      if (!all_finite(g[l][k])) {
        throw DimensionError("g[" + std::to_string(l) + "][" + std::to_string(k) + "]: non-finite entry");
      }
    }
  }

  ChannelSet out;
  out.meta_ = meta;
  out.h_ = std::move(h);
  out.G_ = std::move(G);
  out.g_ = std::move(g);
  out.H_.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    out.H_[l].reserve(K);
    for (std::size_t k = 0; k < K; ++k) out.H_[l].push_back(aggregate_cascade(out.G_[l], out.g_[l][k]));
  }
  out.stacked_.reserve(K);
  const auto n = static_cast<Eigen::Index>(N);
  const auto m = static_cast<Eigen::Index>(M);
  for (std::size_t k = 0; k < K; ++k) {
    CMatrix Hk(n, static_cast<Eigen::Index>(L) * m);
    for (std::size_t l = 0; l < L; ++l) Hk.middleCols(static_cast<Eigen::Index>(l) * m, m) = out.H_[l][k];
    out.stacked_.push_back(std::move(Hk));
  }
  return out;
}

bool operator==(const ChannelSet& a, const ChannelSet& b) {
  const auto& ma = a.meta_;
  const auto& mb = b.meta_;
  if (ma.num_ues != mb.num_ues || ma.num_surfaces != mb.num_surfaces || ma.bs_antennas != mb.bs_antennas ||
      ma.surface_elements != mb.surface_elements || ma.bandwidth_hz != mb.bandwidth_hz ||
      ma.tx_power_watt != mb.tx_power_watt || ma.noise_psd_watt_per_hz != mb.noise_psd_watt_per_hz ||
      ma.carrier_freq_hz != mb.carrier_freq_hz) {
    return false;
  }
  return a.h_ == b.h_ && a.G_ == b.G_ && a.g_ == b.g_;
}

CMatrix aggregate_cascade(const CMatrix& G, const CVector& g) {
  if (G.rows() != g.size()) {
    throw DimensionError("aggregate_cascade: G has " + std::to_string(G.rows()) + " rows but g has length " +
                         std::to_string(g.size()));
  }
  return G.transpose() * g.asDiagonal();
}

std::vector<Vec3> upa_offsets(std::size_t elements, double spacing_m, const Vec3& normal) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(elements))));
  if (side * side != elements) throw ConfigError("upa_offsets: element count must be a perfect square");
  const Vec3 n = normalized(normal, "array normal");
  const Vec3 helper = std::abs(n[2]) < 0.9 ? Vec3{0.0, 0.0, 1.0} : Vec3{1.0, 0.0, 0.0};
  const Vec3 u = normalized(cross(helper, n), "array axis");
  const Vec3 v = cross(n, u);
  const double center = (static_cast<double>(side) - 1.0) / 2.0;
  std::vector<Vec3> out;
  out.reserve(elements);
  for (std::size_t i = 0; i < side; ++i) {
    for (std::size_t j = 0; j < side; ++j) {
      const double a = (static_cast<double>(i) - center) * spacing_m;
      const double b = (static_cast<double>(j) - center) * spacing_m;
      out.push_back({a * u[0] + b * v[0], a * u[1] + b * v[1], a * u[2] + b * v[2]});
    }
  }
  return out;
}

ChannelSet synthesize_channels(const SceneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const SceneMeta meta = cfg.meta();
  const std::size_t K = cfg.num_ues;
  const std::size_t L = cfg.num_surfaces;
  const std::size_t N = cfg.bs_antennas;
  const std::size_t M = cfg.surface_elements;
  const double lambda = meta.wavelength();
  const double wavenumber = 2.0 * std::numbers::pi / lambda;
  const double blocked_gain = std::pow(10.0, -cfg.blockage_db / 20.0);

  const auto bs_offsets = upa_offsets(N, cfg.bs_spacing_wavelengths * lambda, cfg.bs_normal);
  std::vector<std::vector<Vec3>> surface_offsets;
  std::vector<Vec3> surface_normals;
  for (std::size_t l = 0; l < L; ++l) {
    surface_offsets.push_back(
        upa_offsets(M, cfg.element_spacing_wavelengths * lambda, cfg.surfaces[l].normal));
    surface_normals.push_back(normalized(cfg.surfaces[l].normal, "surfaces.normal"));
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  auto phase_error = [&]() { return cfg.phase_jitter_rad > 0.0 ? cfg.phase_jitter_rad * jitter(rng) : 0.0; };

  const LinkEnd bs_end{LinkEnd::Kind::Bs, 0};
  auto pathloss = [&](double d) { return lambda / (4.0 * std::numbers::pi * d); };

  std::vector<CVector> h(K);
  for (std::size_t k = 0; k < K; ++k) {
    const LinkEnd ue_end{LinkEnd::Kind::Ue, k};
    const Link link = make_link(cfg.bs_position, cfg.ues[k], "bs -> ue:" + std::to_string(k));
    double amp = pathloss(link.distance);
    if (cfg.is_blocked(bs_end, ue_end)) amp *= blocked_gain;
    h[k].resize(static_cast<Eigen::Index>(N));
    for (std::size_t n = 0; n < N; ++n) {
      const double path = link.distance - dot(bs_offsets[n], link.direction);
      h[k][static_cast<Eigen::Index>(n)] = std::polar(amp, -wavenumber * path);
    }
  }

  std::vector<CMatrix> G(L);
  std::vector<std::vector<CVector>> g(L, std::vector<CVector>(K));
  for (std::size_t l = 0; l < L; ++l) {
    const LinkEnd s_end{LinkEnd::Kind::Surface, l};
    const Vec3& pos = cfg.surfaces[l].position;
    const auto& normal = surface_normals[l];
    const auto& offs = surface_offsets[l];

    const Link in = make_link(cfg.bs_position, pos, "bs -> surface:" + std::to_string(l));
    double amp_in = pathloss(in.distance) * std::max(0.0, -dot(normal, in.direction));
    if (cfg.is_blocked(bs_end, s_end)) amp_in *= blocked_gain;
    G[l].resize(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(N));
    for (std::size_t m = 0; m < M; ++m) {
      const double err = phase_error();
      for (std::size_t n = 0; n < N; ++n) {
        const double path = in.distance - dot(bs_offsets[n], in.direction) + dot(offs[m], in.direction);
        G[l](static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)) =
            std::polar(amp_in, -wavenumber * path + err);
      }
    }

    for (std::size_t k = 0; k < K; ++k) {
      const LinkEnd ue_end{LinkEnd::Kind::Ue, k};
      const Link out = make_link(pos, cfg.ues[k], "surface:" + std::to_string(l) + " -> ue:" + std::to_string(k));
      double amp_out = pathloss(out.distance) * std::max(0.0, dot(normal, out.direction));
      if (cfg.is_blocked(s_end, ue_end)) amp_out *= blocked_gain;
      g[l][k].resize(static_cast<Eigen::Index>(M));
      for (std::size_t m = 0; m < M; ++m) {
        const double path = out.distance - dot(offs[m], out.direction);
        g[l][k][static_cast<Eigen::Index>(m)] = std::polar(amp_out, -wavenumber * path);
      }
    }
  }

  return ChannelSet::assemble(meta, std::move(h), std::move(G), std::move(g));
}

}  // namespace metasurf
