// SPDX-License-Identifier: Apache-2.0
#include "metasurf_cli/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include <metasurf/json_io.hpp>

namespace metasurf::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt12(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Value rounded to 12 significant digits; non-finite values become null.
json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return std::strtod(fmt12(v).c_str(), nullptr);
}

json num_array(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

json read_json_file(const fs::path& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(what + " '" + path.string() + "': cannot open");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + " '" + path.string() + "': invalid JSON: " + e.what());
  }
}

double get_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(where + ": non-finite value");
  return v;
}

std::uint64_t get_count(const json& j, const std::string& where) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0)) {
    throw ConfigError(where + ": expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

bool get_bool(const json& j, const std::string& where) {
  if (!j.is_boolean()) throw ConfigError(where + ": expected true or false");
  return j.get<bool>();
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& item : j.items()) {
    if (!known.contains(item.key())) throw ConfigError(where + item.key() + ": unknown field");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::vector<std::size_t> normalized_budgets(std::vector<std::size_t> b, const std::string& where) {
  if (b.empty()) throw ConfigError(where + ": list is empty");
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  return b;
}

void parse_deploy(const json& j, DeployConfig& d) {
  if (!j.is_object()) throw ConfigError("deploy: expected an object");
  reject_unknown(j,
                 {"max_iters", "omega", "tau_min", "slack_tol", "sms_deviation_tol", "threads", "solver_tol",
                  "retry_tol", "node_limit"},
                 "deploy.");
  if (j.contains("max_iters")) d.max_iters = static_cast<int>(get_count(j.at("max_iters"), "deploy.max_iters"));
  if (j.contains("omega")) d.omega = get_number(j.at("omega"), "deploy.omega");
  if (j.contains("tau_min")) d.tau_min = get_number(j.at("tau_min"), "deploy.tau_min");
  if (j.contains("slack_tol")) d.slack_tol = get_number(j.at("slack_tol"), "deploy.slack_tol");
  if (j.contains("sms_deviation_tol")) {
    d.sms_deviation_tol = get_number(j.at("sms_deviation_tol"), "deploy.sms_deviation_tol");
  }
  if (j.contains("threads")) d.threads = static_cast<unsigned>(get_count(j.at("threads"), "deploy.threads"));
  if (j.contains("solver_tol")) d.mip.solver.tol = get_number(j.at("solver_tol"), "deploy.solver_tol");
  if (j.contains("retry_tol")) d.mip.retry_tol = get_number(j.at("retry_tol"), "deploy.retry_tol");
  if (j.contains("node_limit")) d.mip.node_limit = get_count(j.at("node_limit"), "deploy.node_limit");
  if (!(d.slack_tol > 0.0)) throw ConfigError("deploy.slack_tol: must be positive");
  if (!(d.sms_deviation_tol > 0.0)) throw ConfigError("deploy.sms_deviation_tol: must be positive");
  if (!(d.mip.retry_tol > 0.0)) throw ConfigError("deploy.retry_tol: must be positive");
  if (d.mip.node_limit < 1) throw ConfigError("deploy.node_limit: must be at least 1");
}

std::vector<double> iteration_field(const StartReport& s, double IterationRecord::*field) {
  std::vector<double> out;
  for (const auto& it : s.iterations) out.push_back(it.*field);
  return out;
}

double final_objective(const StartReport& s) { return s.iterations.empty() ? kNaN : s.iterations.back().objective; }
double final_slack(const StartReport& s) { return s.iterations.empty() ? kNaN : s.iterations.back().max_slack; }
double start_rate(const StartReport& s) { return s.has_plan ? s.evaluation.min_rate_bps : kNaN; }

json plan_json(const SurfacePlan& plan) {
  json alpha = json::array(), phases = json::array();
  for (std::size_t l = 0; l < plan.alpha.size(); ++l) {
    alpha.push_back(static_cast<int>(plan.alpha[l]));
    auto angles = [](const CVector& v) {
      json a = json::array();
      for (const auto& c : v) a.push_back(num(std::arg(c)));
      return a;
    };
    if (plan.alpha[l]) {
      json per_ue = json::array();
      for (const auto& v : plan.ris_phases[l]) per_ue.push_back(angles(v));
      phases.push_back({{"type", "ris"}, {"phase_rad", per_ue}});
    } else {
      phases.push_back({{"type", "sms"}, {"phase_rad", angles(plan.sms_phases[l])}});
    }
  }
  return {{"alpha", alpha}, {"surfaces", phases}};
}

json start_json(const StartReport& s, const EmitOptions& o) {
  json j;
  j["start"] = s.index;
  j["seed"] = s.seed;
  j["status"] = conic::to_string(s.status);
  j["completed"] = s.completed();
  j["error"] = s.error.empty() ? json(nullptr) : json(s.error);
  j["iteration_count"] = s.iterations.size();
  j["final_objective"] = num(final_objective(s));
  j["max_slack"] = num(final_slack(s));
  j["min_rate_bps"] = num(start_rate(s));
  j["wallclock_s"] = num(o.timing ? s.wallclock_s : 0.0);
  j["objective_trace"] = num_array(iteration_field(s, &IterationRecord::objective));
  j["r_min_trace"] = num_array(iteration_field(s, &IterationRecord::r_min));
  j["max_slack_trace"] = num_array(iteration_field(s, &IterationRecord::max_slack));
  json nodes = json::array(), proven = json::array();
  for (const auto& it : s.iterations) {
    nodes.push_back(it.mip_nodes);
    proven.push_back(it.proven_optimal);
  }
  j["mip_nodes"] = nodes;
  j["mip_proven_optimal"] = proven;
  if (s.has_plan) {
    j["plan"] = plan_json(s.plan);
    j["alpha"] = j["plan"]["alpha"];
    j["snr"] = num_array(s.evaluation.snr);
    j["tau"] = num_array(s.allocation.tau);
    j["solver_tau"] = num_array(s.solver_tau);
    j["rate_bps"] = num_array(s.evaluation.rate_bps);
    j["worst_ue"] = s.evaluation.worst_ue;
  } else {
    j["plan"] = nullptr;
  }
  return j;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("output '" + path.string() + "': cannot open for writing");
  out << content;
  out.close();
  if (!out) throw ConfigError("output '" + path.string() + "': write failed");
}

}  // namespace

Format parse_format(const std::string& text, const std::string& where) {
  if (text == "csv") return Format::Csv;
  if (text == "json") return Format::Json;
  throw ConfigError(where + ": unknown format '" + text + "' (expected csv or json)");
}

RunConfig parse_run_config(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config: expected an object");
  reject_unknown(j,
                 {"scene", "channels", "channel_seed", "budgets", "seed", "starts", "tol", "formats", "exhaustive_mip",
                  "timing", "deploy"},
                 "");
  RunConfig cfg;
  const bool has_scene = j.contains("scene"), has_channels = j.contains("channels");
  if (has_scene == has_channels) throw ConfigError("scene: exactly one of 'scene' and 'channels' is required");
  if (has_scene) {
    const json& s = j.at("scene");
    if (s.is_string()) {
      const fs::path path = resolve(base_dir, s.get<std::string>());
      cfg.scene = scene_from_json(read_json_file(path, "scene file"), "scene");
    } else {
      cfg.scene = scene_from_json(s, "scene");
    }
  } else {
    if (!j.at("channels").is_string()) throw ConfigError("channels: expected a file path");
    cfg.channel_file = resolve(base_dir, j.at("channels").get<std::string>());
  }
  if (j.contains("channel_seed")) cfg.channel_seed = get_count(j.at("channel_seed"), "channel_seed");
  if (j.contains("budgets")) {
    const json& b = j.at("budgets");
    if (!b.is_array()) throw ConfigError("budgets: expected an array of integers");
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < b.size(); ++i) v.push_back(get_count(b[i], "budgets[" + std::to_string(i) + "]"));
    cfg.budgets = normalized_budgets(std::move(v), "budgets");
  }
  if (j.contains("seed")) cfg.deploy.seed = get_count(j.at("seed"), "seed");
  if (j.contains("starts")) cfg.deploy.starts = static_cast<int>(get_count(j.at("starts"), "starts"));
  if (j.contains("tol")) cfg.deploy.tol = get_number(j.at("tol"), "tol");
  if (j.contains("exhaustive_mip")) cfg.deploy.mip.exhaustive = get_bool(j.at("exhaustive_mip"), "exhaustive_mip");
  if (j.contains("timing")) cfg.timing = get_bool(j.at("timing"), "timing");
  if (j.contains("formats")) {
    const json& f = j.at("formats");
    if (!f.is_array() || f.empty()) throw ConfigError("formats: expected a non-empty array");
    cfg.formats.clear();
    for (std::size_t i = 0; i < f.size(); ++i) {
      const std::string w = "formats[" + std::to_string(i) + "]";
      if (!f[i].is_string()) throw ConfigError(w + ": expected \"csv\" or \"json\"");
      cfg.formats.push_back(parse_format(f[i].get<std::string>(), w));
    }
  }
  if (j.contains("deploy")) parse_deploy(j.at("deploy"), cfg.deploy);
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  return parse_run_config(read_json_file(path, "config"), path.parent_path());
}

ChannelSet prepare_channels(const RunConfig& cfg) {
  ChannelSet ch = cfg.scene ? synthesize_channels(*cfg.scene, cfg.channel_seed) : load_channels(cfg.channel_file);
  if (cfg.budgets.empty()) throw ConfigError("budgets: list is empty");
  for (std::size_t b : cfg.budgets) {
    DeployConfig d = cfg.deploy;
    d.budget = b;
    d.validate(ch.num_ues(), ch.num_surfaces());
  }
  return ch;
}

std::string sweep_csv(const std::vector<SolveReport>& reports, const EmitOptions& o) {
  std::ostringstream out;
  out << "budget,start,iteration_count,final_objective,min_rate_bps,max_slack,wallclock_s\n";
  for (const auto& r : reports) {
    for (const auto& s : r.starts) {
      out << r.budget << ',' << s.index << ',' << s.iterations.size() << ',' << fmt12(final_objective(s)) << ','
          << fmt12(start_rate(s)) << ',' << fmt12(final_slack(s)) << ',' << fmt12(o.timing ? s.wallclock_s : 0.0)
          << '\n';
    }
  }
  return out.str();
}

json report_json(const std::vector<SolveReport>& reports, const ChannelSet& channels, const EmitOptions& o) {
  if (reports.empty()) throw ConfigError("reports: list is empty");
  const auto& m = channels.meta();
  json j;
  j["format_version"] = 1;
  j["seed"] = o.seed;
  j["scene"] = {{"num_ues", channels.num_ues()},
                {"num_surfaces", channels.num_surfaces()},
                {"bs_antennas", channels.bs_antennas()},
                {"surface_elements", channels.surface_elements()},
                {"bandwidth_hz", num(m.bandwidth_hz)},
                {"tx_power_watt", num(m.tx_power_watt)},
                {"noise_psd_watt_per_hz", num(m.noise_psd_watt_per_hz)}};
  bool complete = true;
  json sweep = json::array();
  for (const auto& r : reports) {
    json e;
    e["budget"] = r.budget;
    e["status"] = conic::to_string(r.status);
    e["complete"] = r.complete();
    complete = complete && r.complete();
    e["best_start"] = r.best;
    e["has_plan"] = r.has_plan();
    e["min_rate_bps"] = num(r.has_plan() ? r.min_rate_bps() : kNaN);
    e["marginal_gain_bps"] = num(r.marginal_gain_bps);
    e["wallclock_s"] = num(o.timing ? r.wallclock_s : 0.0);
    if (r.has_plan()) {
      const auto& w = r.winner();
      e["alpha"] = plan_json(w.plan)["alpha"];
      e["ris_count"] = w.plan.ris_count();
      e["snr"] = num_array(w.evaluation.snr);
      e["tau"] = num_array(w.allocation.tau);
      e["rate_bps"] = num_array(w.evaluation.rate_bps);
      e["objective_trace"] = num_array(iteration_field(w, &IterationRecord::objective));
    }
    e["starts"] = json::array();
    for (const auto& s : r.starts) e["starts"].push_back(start_json(s, o));
    sweep.push_back(std::move(e));
  }
  j["complete"] = complete;
  j["partial"] = !complete;
  j["sweep"] = std::move(sweep);
  return j;
}

std::vector<fs::path> emit_reports(const std::vector<SolveReport>& reports, const ChannelSet& channels,
                                   const fs::path& dir, const std::vector<Format>& formats, const EmitOptions& o) {
  if (reports.empty()) throw ConfigError("reports: list is empty");
  if (formats.empty()) throw ConfigError("formats: list is empty");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigError("output directory '" + dir.string() + "': cannot create (" + ec.message() + ")");
  }
  std::vector<fs::path> written;
  auto wants = [&](Format f) { return std::find(formats.begin(), formats.end(), f) != formats.end(); };
  if (wants(Format::Csv)) {
    written.push_back(dir / "sweep.csv");
    write_file(written.back(), sweep_csv(reports, o));
  }
  if (wants(Format::Json)) {
    written.push_back(dir / "report.json");
    write_file(written.back(), report_json(reports, channels, o).dump(2) + "\n");
  }
  return written;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Optimize static and reconfigurable metasurface placement for max-min rate."};
  app.name("optimize");
  std::string config_path, out_dir;
  std::vector<long long> budgets;
  std::vector<std::string> formats;
  std::uint64_t seed = 0;
  int starts = 0;
  double tol = 0.0;
  bool exhaustive = false, no_timing = false;
  app.add_option("--config", config_path, "Run configuration (JSON)")->required();
  app.add_option("--out", out_dir, "Output directory")->required();
  auto* budgets_opt = app.add_option("--budgets", budgets, "Comma-separated RIS budgets")->delimiter(',');
  auto* seed_opt = app.add_option("--seed", seed, "Seed of the random starts");
  auto* starts_opt = app.add_option("--starts", starts, "Random starts per budget");
  auto* format_opt = app.add_option("--format", formats, "Report formats: csv,json")->delimiter(',');
  app.add_flag("--exhaustive-mip", exhaustive, "Enumerate surface-type patterns instead of branching");
  auto* tol_opt = app.add_option("--tol", tol, "Relative objective change that stops the iterations");
  app.add_flag("--no-timing", no_timing, "Write zero wallclock times");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  RunConfig cfg;
  ChannelSet channels;
  try {
    cfg = load_run_config(config_path);
    if (*budgets_opt) {
      std::vector<std::size_t> b;
      for (long long v : budgets) {
        if (v < 0) throw ConfigError("--budgets: negative budget " + std::to_string(v));
        b.push_back(static_cast<std::size_t>(v));
      }
      cfg.budgets = normalized_budgets(std::move(b), "--budgets");
    }
    if (*seed_opt) cfg.deploy.seed = seed;
    if (*starts_opt) cfg.deploy.starts = starts;
    if (*tol_opt) cfg.deploy.tol = tol;
    if (exhaustive) cfg.deploy.mip.exhaustive = true;
    if (no_timing) cfg.timing = false;
    if (*format_opt) {
      cfg.formats.clear();
      for (const auto& f : formats) cfg.formats.push_back(parse_format(f, "--format"));
    }
    cfg.out_dir = out_dir;
    channels = prepare_channels(cfg);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DimensionError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  const EmitOptions options{.timing = cfg.timing, .seed = cfg.deploy.seed};
  std::vector<SolveReport> reports;
  try {
    reports = sweep_budget(channels, cfg.budgets, cfg.deploy);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  }

  try {
    for (const auto& p : emit_reports(reports, channels, cfg.out_dir, cfg.formats, options)) {
      out << "wrote " << p.string() << '\n';
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  bool complete = true;
  for (const auto& r : reports) {
    out << "budget " << r.budget << ": min rate " << fmt12(r.min_rate_bps()) << " bps, " << r.winner().plan.ris_count()
        << " RIS, best start " << r.best << '\n';
    for (const auto& s : r.starts) {
      if (s.completed()) continue;
      complete = false;
      err << "solver failure: budget " << r.budget << " start " << s.index << ": "
          << (s.error.empty() ? conic::to_string(s.status) : s.error) << '\n';
    }
  }
  if (!complete) {
    err << "reports are flagged partial\n";
    return kExitSolver;
  }
  return kExitOk;
}

}  // namespace metasurf::cli
