// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <fstream>
#include <sstream>

#include "metasurf/channel.hpp"
#include "metasurf/json_io.hpp"

namespace metasurf {
namespace {

using nlohmann::json;

const json& field(const json& obj, const char* name, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  auto it = obj.find(name);
  if (it == obj.end()) throw ConfigError(where + "." + name + ": missing field");
  return *it;
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(where + ": non-finite value");
  return v;
}

std::size_t count(const json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    throw ConfigError(where + ": expected a non-negative integer");
  }
  return j.get<std::size_t>();
}

Vec3 vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(where + ": expected [x, y, z]");
  return {number(j[0], where + "[0]"), number(j[1], where + "[1]"), number(j[2], where + "[2]")};
}

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

const json& array_of(const json& j, std::size_t n, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array");
  if (j.size() != n) {
    throw DimensionError(where + ": expected " + std::to_string(n) + " entries, got " + std::to_string(j.size()));
  }
  return j;
}

Complex complex_pair(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw DimensionError(where + ": expected [re, im] pair");
  if (!j[0].is_number() || !j[1].is_number()) throw ConfigError(where + ": expected numeric [re, im]");
  const double re = j[0].get<double>();
  const double im = j[1].get<double>();
  if (!std::isfinite(re) || !std::isfinite(im)) throw DimensionError(where + ": non-finite entry");
  return {re, im};
}

json pair(Complex c) { return json::array({c.real(), c.imag()}); }

std::string idx(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

}  // namespace

SceneConfig scene_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  SceneConfig cfg;
  auto opt_number = [&](const char* name, double& out) {
    if (j.contains(name)) out = number(j.at(name), where + "." + name);
  };

  const json& ues = field(j, "ues", where);
  if (!ues.is_array()) throw ConfigError(where + ".ues: expected an array of positions");
  for (std::size_t k = 0; k < ues.size(); ++k) cfg.ues.push_back(vec3(ues[k], idx(where + ".ues", k)));

  if (j.contains("surfaces")) {
    const json& s = j.at("surfaces");
    if (!s.is_array()) throw ConfigError(where + ".surfaces: expected an array");
    for (std::size_t l = 0; l < s.size(); ++l) {
      const std::string w = idx(where + ".surfaces", l);
      SurfacePlacement p;
      p.position = vec3(field(s[l], "position", w), w + ".position");
      p.normal = vec3(field(s[l], "normal", w), w + ".normal");
      cfg.surfaces.push_back(p);
    }
  }
  cfg.num_ues = cfg.ues.size();
  cfg.num_surfaces = cfg.surfaces.size();
  if (j.contains("num_ues") && count(j.at("num_ues"), where + ".num_ues") != cfg.num_ues) {
    throw ConfigError(where + ".num_ues: does not match the number of UE positions");
  }
  if (j.contains("num_surfaces") && count(j.at("num_surfaces"), where + ".num_surfaces") != cfg.num_surfaces) {
    throw ConfigError(where + ".num_surfaces: does not match the number of surface placements");
  }

  cfg.bs_antennas = count(field(j, "bs_antennas", where), where + ".bs_antennas");
  cfg.surface_elements =
      j.contains("surface_elements") ? count(j.at("surface_elements"), where + ".surface_elements") : 1;
  opt_number("carrier_freq_hz", cfg.carrier_freq_hz);
  opt_number("bandwidth_hz", cfg.bandwidth_hz);
  opt_number("tx_power_watt", cfg.tx_power_watt);
  if (j.contains("tx_power_dbm")) cfg.tx_power_watt = dbm_to_watt(number(j.at("tx_power_dbm"), where + ".tx_power_dbm"));
  opt_number("noise_psd_watt_per_hz", cfg.noise_psd_watt_per_hz);
  if (j.contains("noise_psd_dbm_per_hz")) {
    cfg.noise_psd_watt_per_hz = dbm_to_watt(number(j.at("noise_psd_dbm_per_hz"), where + ".noise_psd_dbm_per_hz"));
  }
  opt_number("noise_figure_db", cfg.noise_figure_db);
  opt_number("blockage_db", cfg.blockage_db);
  opt_number("bs_spacing_wavelengths", cfg.bs_spacing_wavelengths);
  opt_number("element_spacing_wavelengths", cfg.element_spacing_wavelengths);
  opt_number("phase_jitter_rad", cfg.phase_jitter_rad);

  const json& bs = field(j, "bs", where);
  cfg.bs_position = vec3(field(bs, "position", where + ".bs"), where + ".bs.position");
  if (bs.contains("normal")) cfg.bs_normal = vec3(bs.at("normal"), where + ".bs.normal");

  if (j.contains("blockages")) {
    const json& b = j.at("blockages");
    if (!b.is_array()) throw ConfigError(where + ".blockages: expected an array of [end, end] pairs");
    for (std::size_t i = 0; i < b.size(); ++i) {
      const std::string w = idx(where + ".blockages", i);
      if (!b[i].is_array() || b[i].size() != 2 || !b[i][0].is_string() || !b[i][1].is_string()) {
        throw ConfigError(w + ": expected [\"bs\"|\"surface:i\"|\"ue:k\", ...] pair");
      }
      try {
        cfg.blockages.push_back({LinkEnd::parse(b[i][0].get<std::string>()), LinkEnd::parse(b[i][1].get<std::string>())});
      } catch (const ConfigError& e) {
        throw ConfigError(w + ": " + e.what());
      }
    }
  }

  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(where + "." + e.what());
  }
  return cfg;
}

json scene_to_json(const SceneConfig& cfg) {
  json j;
  j["bs_antennas"] = cfg.bs_antennas;
  j["surface_elements"] = cfg.surface_elements;
  j["carrier_freq_hz"] = cfg.carrier_freq_hz;
  j["bandwidth_hz"] = cfg.bandwidth_hz;
  j["tx_power_watt"] = cfg.tx_power_watt;
  j["noise_psd_watt_per_hz"] = cfg.noise_psd_watt_per_hz;
  j["noise_figure_db"] = cfg.noise_figure_db;
  j["blockage_db"] = cfg.blockage_db;
  j["bs_spacing_wavelengths"] = cfg.bs_spacing_wavelengths;
  j["element_spacing_wavelengths"] = cfg.element_spacing_wavelengths;
  j["phase_jitter_rad"] = cfg.phase_jitter_rad;
  j["bs"] = {{"position", cfg.bs_position}, {"normal", cfg.bs_normal}};
  j["surfaces"] = json::array();
  for (const auto& s : cfg.surfaces) j["surfaces"].push_back({{"position", s.position}, {"normal", s.normal}});
  j["ues"] = cfg.ues;
  j["blockages"] = json::array();
  for (const auto& b : cfg.blockages) j["blockages"].push_back({b.a.to_string(), b.b.to_string()});
  return j;
}

ChannelSet channels_from_json(const json& j) {
  const json& meta_j = field(j, "meta", "channels");
  SceneMeta meta;
  meta.num_ues = count(field(meta_j, "K", "meta"), "meta.K");
  meta.num_surfaces = count(field(meta_j, "L", "meta"), "meta.L");
  meta.bs_antennas = count(field(meta_j, "N", "meta"), "meta.N");
  meta.surface_elements = count(field(meta_j, "M", "meta"), "meta.M");
  meta.bandwidth_hz = number(field(meta_j, "B", "meta"), "meta.B");
  meta.tx_power_watt = number(field(meta_j, "P", "meta"), "meta.P");
  meta.noise_psd_watt_per_hz = number(field(meta_j, "N0", "meta"), "meta.N0");
  meta.carrier_freq_hz = number(field(meta_j, "carrier", "meta"), "meta.carrier");
  if (meta.num_ues < 1) throw ConfigError("meta.K: must be >= 1");
  if (meta.bs_antennas < 1) throw ConfigError("meta.N: must be >= 1");
  if (meta.surface_elements < 1) throw ConfigError("meta.M: must be >= 1");
  if (!(meta.bandwidth_hz > 0) || !(meta.tx_power_watt > 0) || !(meta.noise_psd_watt_per_hz > 0) ||
      !(meta.carrier_freq_hz > 0)) {
    throw ConfigError("meta: B, P, N0 and carrier must be > 0");
  }
  const std::size_t K = meta.num_ues, L = meta.num_surfaces, N = meta.bs_antennas, M = meta.surface_elements;

  const json& hj = array_of(field(j, "h", "channels"), K, "h");
  std::vector<CVector> h(K, CVector(static_cast<Eigen::Index>(N)));
  for (std::size_t k = 0; k < K; ++k) {
    const json& row = array_of(hj[k], N, idx("h", k));
    for (std::size_t n = 0; n < N; ++n) h[k][static_cast<Eigen::Index>(n)] = complex_pair(row[n], idx(idx("h", k), n));
  }

  const json& Gj = array_of(field(j, "G", "channels"), L, "G");
  std::vector<CMatrix> G(L, CMatrix(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(N)));
  for (std::size_t l = 0; l < L; ++l) {
    const json& mat = array_of(Gj[l], M, idx("G", l));
    for (std::size_t m = 0; m < M; ++m) {
      const json& row = array_of(mat[m], N, idx(idx("G", l), m));
      for (std::size_t n = 0; n < N; ++n) {
        G[l](static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)) =
            complex_pair(row[n], idx(idx(idx("G", l), m), n));
      }
    }
  }

  const json& gj = array_of(field(j, "g", "channels"), L, "g");
  std::vector<std::vector<CVector>> g(L, std::vector<CVector>(K, CVector(static_cast<Eigen::Index>(M))));
  for (std::size_t l = 0; l < L; ++l) {
    const json& per_ue = array_of(gj[l], K, idx("g", l));
    for (std::size_t k = 0; k < K; ++k) {
      const json& row = array_of(per_ue[k], M, idx(idx("g", l), k));
      for (std::size_t m = 0; m < M; ++m) {
        g[l][k][static_cast<Eigen::Index>(m)] = complex_pair(row[m], idx(idx(idx("g", l), k), m));
      }
    }
  }
  return ChannelSet::assemble(meta, std::move(h), std::move(G), std::move(g));
}

json channels_to_json(const ChannelSet& ch) {
  const auto& m = ch.meta();
  json j;
  j["meta"] = {{"K", m.num_ues},          {"L", m.num_surfaces}, {"N", m.bs_antennas},
               {"M", m.surface_elements}, {"B", m.bandwidth_hz}, {"P", m.tx_power_watt},
               {"N0", m.noise_psd_watt_per_hz}, {"carrier", m.carrier_freq_hz}};
  json h = json::array();
  for (std::size_t k = 0; k < m.num_ues; ++k) {
    json row = json::array();
    for (const auto& v : ch.direct(k)) row.push_back(pair(v));
    h.push_back(std::move(row));
  }
  json G = json::array();
  json g = json::array();
  for (std::size_t l = 0; l < m.num_surfaces; ++l) {
    const CMatrix& Gl = ch.bs_to_surface(l);
    json mat = json::array();
    for (Eigen::Index r = 0; r < Gl.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < Gl.cols(); ++c) row.push_back(pair(Gl(r, c)));
      mat.push_back(std::move(row));
    }
    G.push_back(std::move(mat));
    json per_ue = json::array();
    for (std::size_t k = 0; k < m.num_ues; ++k) {
      json row = json::array();
      for (const auto& v : ch.surface_to_ue(l, k)) row.push_back(pair(v));
      per_ue.push_back(std::move(row));
    }
    g.push_back(std::move(per_ue));
  }
  j["h"] = std::move(h);
  j["G"] = std::move(G);
  j["g"] = std::move(g);
  return j;
}

SceneConfig scene_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scene: malformed JSON: ") + e.what());
  }
  return scene_from_json(j);
}

ChannelSet channels_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("channels: malformed JSON: ") + e.what());
  }
  return channels_from_json(j);
}

std::string channels_to_json_text(const ChannelSet& channels) { return channels_to_json(channels).dump(); }

ChannelSet load_channels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("channel file '" + path.string() + "': cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return channels_from_json_text(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError("channel file '" + path.string() + "': " + e.what());
  } catch (const DimensionError& e) {
    throw DimensionError("channel file '" + path.string() + "': " + e.what());
  }
}

void save_channels(const ChannelSet& channels, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("channel file '" + path.string() + "': cannot open for writing");
  out << channels_to_json_text(channels) << '\n';
  if (!out) throw ConfigError("channel file '" + path.string() + "': write failed");
}

}  // namespace metasurf
