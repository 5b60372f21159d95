// SPDX-License-Identifier: Apache-2.0
// Property-based acceptance checks. Prints one PASS/FAIL line per criterion
// and exits with the number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include <metasurf/channel.hpp>
#include <metasurf/conic.hpp>
#include <metasurf/deploy.hpp>
#include <metasurf/json_io.hpp>
#include <metasurf/mibb.hpp>
#include <metasurf/p3.hpp>

#include "oracles/conic_oracles.hpp"
#include "oracles/random_scenes.hpp"

namespace fs = std::filesystem;
using namespace metasurf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

SceneConfig desk_scene() {
  return scene_from_json_text(slurp(fs::path(METASURF_SCENE_DIR) / "desk.json"));
}

ChannelSet desk_channels() { return synthesize_channels(desk_scene(), 1); }

/// Settings of the shipped run config.
DeployConfig desk_deploy() {
  DeployConfig cfg;
  cfg.seed = 7;
  cfg.starts = 3;
  cfg.tau_min = 0.0625;
  return cfg;
}

Outcome surrogate_validity() {
  std::mt19937_64 rng(2);
  double worst_violation = 0.0, worst_gap = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index n = 1 + trial % 8;
    QuadData q;
    q.A = testing::random_psd(rng, n, 1 + trial % 4);
    q.b = testing::random_cvector(rng, n);
    q.c = 0.0;
    const CVector z = testing::random_cvector(rng, n), zeta = testing::random_cvector(rng, n);
    // -z'Az is bounded above by its linearization at zeta.
    worst_violation = std::max(worst_violation, -(q.evaluate(z) - q.c) - surrogate_lhs(q, zeta, z));
    worst_gap = std::max(worst_gap, std::abs(surrogate_lhs(q, z, z) + (q.evaluate(z) - q.c)));
  }
  return {worst_violation <= 1e-9 && worst_gap <= 1e-10,
          "max violation " + fmt("%.2e", worst_violation) + ", max gap at expansion point " + fmt("%.2e", worst_gap)};
}

Outcome conic_oracles() {
  using conic::ConeBlock;
  double worst = 0.0;
  int failures = 0;
  for (auto method : {conic::ConicMethod::Splitting, conic::ConicMethod::InteriorPoint}) {
    conic::SolverSettings s;
    s.method = method;
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 30; ++trial) {
      const bool exp = trial >= 20;
      const int n = exp ? 3 + trial % 7 : 3 + trial % 8;
      const auto k = exp ? testing::make_known_optimum(
                               rng, n, {ConeBlock::exp(), ConeBlock::exp(), ConeBlock::nonneg(n), ConeBlock::soc(3)})
                         : testing::make_known_optimum(
                               rng, n, {ConeBlock::soc(3), ConeBlock::soc(4), ConeBlock::nonneg(n), ConeBlock::soc(3)});
      const auto sol = conic::solve_conic(k.problem, s);
      if (sol.status != conic::SolveStatus::Optimal) {
        ++failures;
        continue;
      }
      worst = std::max(worst, std::abs(sol.objective - k.optimum) / std::max(1.0, std::abs(k.optimum)));
    }
  }
  return {failures == 0 && worst <= 1e-5, "20 SOCP + 10 exp per method, max rel error " + fmt("%.2e", worst) +
                                              ", non-optimal " + std::to_string(failures)};
}

Outcome mip_exactness() {
  double worst = 0.0;
  int mismatched = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(500 + seed);
    const auto ch = testing::random_channels(rng, 3, 3, 2, 2, 4.0, 0.2);
    Iterate it;
    for (std::size_t k = 0; k < 3; ++k) it.z.push_back(testing::random_cvector(rng, 6));
    for (std::size_t budget : {1u, 2u}) {
      const auto inst = build_p3(ch, {.budget = budget, .tau_min = 0.1, .omega = 100.0}, it);
      const auto bb = mibb::solve_mi_conic(inst.problem, inst.layout.binary_indices(), budget);
      mibb::MipSettings e;
      e.exhaustive = true;
      const auto ex = mibb::solve_mi_conic(inst.problem, inst.layout.binary_indices(), budget, e);
      if (!bb.solution.optimal() || !ex.solution.optimal() || !bb.proven_optimal) {
        ++mismatched;
        continue;
      }
      const double err =
          std::abs(bb.solution.objective - ex.solution.objective) / std::max(1.0, std::abs(ex.solution.objective));
      worst = std::max(worst, err);
      if (err > 1e-5) ++mismatched;
    }
  }
  return {mismatched == 0, "20 instance/budget pairs, max rel gap " + fmt("%.2e", worst) + ", mismatches " +
                               std::to_string(mismatched)};
}

Outcome coherent_gain() {
  // One UE and one surface of the desk room, single BS antenna.
  SceneConfig s = desk_scene();
  s.bs_antennas = 1;
  s.surfaces = {s.surfaces[3]};
  s.num_surfaces = 1;
  s.ues = {s.ues[2]};
  s.num_ues = 1;
  s.blockages = {{LinkEnd::parse("bs"), LinkEnd::parse("ue:0")}};
  const auto ch = synthesize_channels(s, 1);
  const double scale = ch.meta().snr_scale();
  const CMatrix& H = ch.cascade(0, 0);
  double amp = std::abs(ch.direct(0)[0]);
  for (Eigen::Index m = 0; m < H.cols(); ++m) amp += std::abs(H(0, m));
  const double bound = amp * amp * scale;

  // Phase-grid oracle, 64 steps per element.
  const int steps = 64;
  const Eigen::Index M = H.cols();
  std::vector<Complex> unit(steps);
  for (int i = 0; i < steps; ++i) unit[static_cast<std::size_t>(i)] = std::polar(1.0, 2.0 * std::numbers::pi * i / steps);
  std::vector<int> idx(static_cast<std::size_t>(M), 0);
  double grid = 0.0;
  while (true) {
    Complex v = ch.direct(0)[0];
    for (Eigen::Index m = 0; m < M; ++m) v += H(0, m) * unit[static_cast<std::size_t>(idx[static_cast<std::size_t>(m)])];
    grid = std::max(grid, std::norm(v) * scale);
    std::size_t d = 0;
    while (d < idx.size() && ++idx[d] == steps) idx[d++] = 0;
    if (d == idx.size()) break;
  }

  DeployConfig cfg;
  cfg.budget = 1;
  const auto r = run_fpp_sca(ch, cfg);
  if (!r.has_plan()) return {false, "no plan"};
  const double gamma = r.winner().evaluation.snr[0];
  const bool grid_ok = grid <= bound * (1.0 + 1e-12) && grid >= bound * std::pow(std::cos(std::numbers::pi / steps), 2);
  return {r.complete() && grid_ok && gamma >= 0.99 * bound && gamma >= 0.99 * grid,
          "snr/bound " + fmt("%.6f", gamma / bound) + ", grid/bound " + fmt("%.6f", grid / bound)};
}

Outcome time_allocation() {
  // Gamma = [1, 7] through the conic path: N=1, L=0, B=1, P/(B N0)=1.
  CVector h0(1), h1(1);
  h0 << 1.0;
  h1 << std::sqrt(7.0);
  const auto ch = ChannelSet::assemble(testing::unit_meta(2, 0, 1, 1), {h0, h1}, {}, {});
  DeployConfig cfg;
  cfg.tau_min = 0.1;
  cfg.starts = 1;
  const auto r = run_fpp_sca(ch, cfg);
  if (!r.has_plan()) return {false, "no plan"};
  const auto& w = r.winner();
  const double r_min = w.iterations.back().r_min;
  const double solver_rate = r_min * r_min;
  const double err = std::max({std::abs(w.solver_tau[0] - 0.75), std::abs(w.solver_tau[1] - 0.25),
                               std::abs(solver_rate - 0.75), std::abs(w.allocation.tau[0] - 0.75),
                               std::abs(w.allocation.tau[1] - 0.25), std::abs(w.evaluation.min_rate_bps - 0.75)});
  return {r.complete() && err <= 1e-6, "tau = [" + fmt("%.9f", w.solver_tau[0]) + ", " + fmt("%.9f", w.solver_tau[1]) +
                                           "], min rate " + fmt("%.9f", solver_rate) + ", max error " +
                                           fmt("%.2e", err)};
}

Outcome convergence() {
  const auto ch = desk_channels();
  DeployConfig cfg = desk_deploy();
  cfg.budget = 3;
  const auto r = run_fpp_sca(ch, cfg);
  bool ok = r.complete();
  double worst_drop = 0.0, worst_slack = 0.0;
  std::size_t latest = 0;
  for (const auto& s : r.starts) {
    const auto& it = s.iterations;
    if (it.empty()) return {false, "start without iterations"};
    for (std::size_t i = 2; i < it.size(); ++i) worst_drop = std::max(worst_drop, it[i - 1].objective - it[i].objective);
    worst_slack = std::max(worst_slack, it.back().max_slack);
    // First 1-based iteration whose relative change drops below 1e-3.
    std::size_t settled = it.size() + 1;
    for (std::size_t i = 1; i < it.size(); ++i) {
      if (std::abs(it[i].objective - it[i - 1].objective) < 1e-3 * std::abs(it[i - 1].objective)) {
        settled = i + 1;
        break;
      }
    }
    latest = std::max(latest, settled);
  }
  ok = ok && worst_drop <= 1e-6 && worst_slack < 1e-5 && latest <= 5;
  return {ok, "L_max 3, 3 starts: max decrease " + fmt("%.2e", worst_drop) + ", settled by iteration " +
                  std::to_string(latest) + ", final max slack " + fmt("%.2e", worst_slack)};
}

Outcome diminishing_returns() {
  const auto ch = desk_channels();
  const auto reports = sweep_budget(ch, {0, 1, 2, 3, 4, 5, 6}, desk_deploy());
  bool ok = true;
  std::string rates;
  double running = 0.0;
  for (const auto& r : reports) {
    ok = ok && r.complete() && r.has_plan();
    ok = ok && r.min_rate_bps() >= 0.98 * running;
    running = std::max(running, r.min_rate_bps());
    rates += fmt("%.4g", r.min_rate_bps() / 1e6) + " ";
  }
  std::size_t arg_max = 1, arg_min = 1;
  for (std::size_t i = 1; i < reports.size(); ++i) {
    if (reports[i].marginal_gain_bps > reports[arg_max].marginal_gain_bps) arg_max = i;
    if (reports[i].marginal_gain_bps < reports[arg_min].marginal_gain_bps) arg_min = i;
  }
  ok = ok && arg_max < arg_min;
  return {ok, "min rate [Mbps] " + rates + "| largest gain at L_max " + std::to_string(arg_max) +
                  ", smallest at L_max " + std::to_string(arg_min)};
}

Outcome single_ue_equivalence() {
  SceneConfig s = desk_scene();
  s.ues = {s.ues[5]};
  s.num_ues = 1;
  s.blockages = {{LinkEnd::parse("bs"), LinkEnd::parse("ue:0")}};
  const auto ch = synthesize_channels(s, 1);
  DeployConfig cfg = desk_deploy();
  cfg.budget = 0;
  const double sms = run_fpp_sca(ch, cfg).min_rate_bps();
  cfg.budget = ch.num_surfaces();
  const double ris = run_fpp_sca(ch, cfg).min_rate_bps();
  const double rel = std::abs(sms - ris) / std::max(sms, ris);
  return {rel <= 1e-6, "L_max 0: " + fmt("%.10g", sms) + " bps, L_max L: " + fmt("%.10g", ris) + " bps, rel diff " +
                           fmt("%.2e", rel)};
}

Outcome cli_determinism() {
  const fs::path base = fs::temp_directory_path() / "metasurf_acceptance_determinism";
  fs::remove_all(base);
  const std::string cmd = std::string(METASURF_OPTIMIZE) + " --config " + METASURF_SCENE_DIR +
                          "/desk_config.json --no-timing --out ";
  for (const char* run : {"a", "b"}) {
    const std::string full = cmd + (base / run).string() + " > " + (base.string() + "_" + run + ".log") + " 2>&1";
    if (std::system(full.c_str()) != 0) return {false, "optimize failed, see " + base.string() + "_" + run + ".log"};
  }
  bool same = true;
  for (const char* file : {"report.json", "sweep.csv"}) {
    const auto a = slurp(base / "a" / file), b = slurp(base / "b" / file);
    same = same && !a.empty() && a == b;
  }
  fs::remove_all(base);
  return {same, same ? "report.json and sweep.csv byte-identical" : "reports differ"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {2, "surrogate validity", 5.0, surrogate_validity},
      {3, "conic solver oracle equivalence", 60.0, conic_oracles},
      {4, "MIP exactness", 300.0, mip_exactness},
      {5, "coherent-gain recovery", 120.0, coherent_gain},
      {6, "time-allocation oracle", 30.0, time_allocation},
      {7, "convergence behavior", 300.0, convergence},
      {8, "diminishing returns", 600.0, diminishing_returns},
      {9, "single-UE SMS/RIS equivalence", 600.0, single_ue_equivalence},
      {10, "determinism", 600.0, cli_determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && t <= c.limit_s;
    failures += pass ? 0 : 1;
    std::printf("criterion %2d %s  %s: %s (%.1f s, limit %.0f s)\n", c.id, pass ? "PASS" : "FAIL", c.name,
                o.detail.c_str(), t, c.limit_s);
    std::fflush(stdout);
  }
  return failures;
}
