// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "metasurf/conic.hpp"

namespace metasurf::conic {
namespace {

using nlohmann::json;

ConeKind kind_from_string(const std::string& s) {
  if (s == "zero") return ConeKind::Zero;
  if (s == "nonneg") return ConeKind::NonNeg;
  if (s == "soc") return ConeKind::SecondOrder;
  if (s == "exp") return ConeKind::Exponential;
  throw ConfigError("problem.cones: unknown cone kind '" + s + "'");
}

json bound_vector(const RVector& v) {
  json out = json::array();
  for (double x : v) {
    if (std::isinf(x)) {
      out.push_back(x > 0 ? "inf" : "-inf");
    } else {
      out.push_back(x);
    }
  }
  return out;
}

RVector read_bounds(const json& j) {
  RVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].is_string()) {
      const auto s = j[i].get<std::string>();
      if (s != "inf" && s != "-inf") throw ConfigError("problem bounds: bad entry '" + s + "'");
      v[static_cast<Eigen::Index>(i)] = (s == "inf" ? 1.0 : -1.0) * std::numeric_limits<double>::infinity();
    } else {
      v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
  }
  return v;
}

}  // namespace

void save_problem(const ConicProblem& p, const std::filesystem::path& path) {
  json j;
  j["n"] = p.num_vars();
  j["m"] = p.num_rows();
  j["c"] = std::vector<double>(p.c.data(), p.c.data() + p.c.size());
  j["b"] = std::vector<double>(p.b.data(), p.b.data() + p.b.size());
  json entries = json::array();
  for (Eigen::Index k = 0; k < p.A.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(p.A, k); it; ++it) entries.push_back({it.row(), it.col(), it.value()});
  }
  j["A"] = std::move(entries);
  json cones = json::array();
  for (const auto& c : p.cones) cones.push_back({{"kind", to_string(c.kind)}, {"dim", c.dim}});
  j["cones"] = std::move(cones);
  if (p.lower.size()) j["lower"] = bound_vector(p.lower);
  if (p.upper.size()) j["upper"] = bound_vector(p.upper);
  std::ofstream out(path);
  if (!out) throw ConfigError("problem file '" + path.string() + "': cannot open for writing");
  out << j.dump() << '\n';
}

ConicProblem load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("problem file '" + path.string() + "': cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::exception& e) {
    throw ConfigError("problem file '" + path.string() + "': " + e.what());
  }
  try {
    ConicProblem p;
    const auto n = j.at("n").get<Eigen::Index>();
    const auto m = j.at("m").get<Eigen::Index>();
    const auto c = j.at("c").get<std::vector<double>>();
    const auto b = j.at("b").get<std::vector<double>>();
    p.c = Eigen::Map<const RVector>(c.data(), static_cast<Eigen::Index>(c.size()));
    p.b = Eigen::Map<const RVector>(b.data(), static_cast<Eigen::Index>(b.size()));
    std::vector<Triplet> trips;
    for (const auto& e : j.at("A")) trips.emplace_back(e.at(0).get<Eigen::Index>(), e.at(1).get<Eigen::Index>(), e.at(2).get<double>());
    p.A.resize(m, n);
    p.A.setFromTriplets(trips.begin(), trips.end());
    for (const auto& cj : j.at("cones")) p.cones.push_back({kind_from_string(cj.at("kind").get<std::string>()), cj.at("dim").get<Eigen::Index>()});
    if (j.contains("lower")) p.lower = read_bounds(j.at("lower"));
    if (j.contains("upper")) p.upper = read_bounds(j.at("upper"));
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw ConfigError("problem file '" + path.string() + "': " + e.what());
  }
}

}  // namespace metasurf::conic
