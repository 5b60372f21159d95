// SPDX-License-Identifier: Apache-2.0
#include "metasurf/deploy.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <numbers>
#include <random>
#include <string>
#include <thread>

namespace metasurf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Exceptions are
/// rethrown after all workers stop; the first by index wins.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(threads, n);
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Complex unit_phase(Complex v) {
  const double mag = std::abs(v);
  return mag < 1e-9 ? Complex(1.0, 0.0) : v / mag;
}

StartReport run_start(const ChannelSet& channels, const std::vector<QuadData>& quads, const DeployConfig& cfg,
                      std::size_t index, std::uint64_t seed) {
  const auto t0 = Clock::now();
  const std::size_t K = channels.num_ues();
  const double tau_min = cfg.effective_tau_min(K);
  const P3Options options{.budget = cfg.budget, .tau_min = tau_min, .omega = cfg.omega};

  StartReport rep;
  rep.index = index;
  rep.seed = seed;
  rep.status = conic::SolveStatus::Optimal;
  Iterate z = init_iterate(channels, seed);
  RVector last_x;
  VariableLayout layout;
  double prev = 0.0;
  for (int i = 0; i < cfg.max_iters; ++i) {
    IterationRecord it;
    auto tb = Clock::now();
    const P3Instance inst = build_p3(quads, channels.meta(), options, z);
    it.build_s = seconds_since(tb);
    auto ts = Clock::now();
    const auto mip = mibb::solve_mi_conic(inst.problem, inst.layout.binary_indices(), cfg.budget, cfg.mip);
    it.solve_s = seconds_since(ts);
    if (mip.solution.status != conic::SolveStatus::Optimal) {
      // Slacks keep P3 feasible, so anything else is a numerical failure.
      rep.status = mip.solution.status;
      break;
    }
    const RVector& x = mip.solution.x;
    const VariableLayout& v = inst.layout;
    it.r_min = x[v.r_min()];
    double slack_sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double s = std::max(0.0, x[v.slack(k)]);
      slack_sum += s;
      it.max_slack = std::max(it.max_slack, s);
    }
    it.objective = it.r_min - cfg.omega * slack_sum;
    it.mip_nodes = mip.nodes;
    it.proven_optimal = mip.proven_optimal;
    rep.iterations.push_back(it);
    last_x = x;
    layout = inst.layout;
    z = extract_iterate(layout, x);
    if (i > 0) {
      const double change = std::abs(it.objective - prev) / std::max(std::abs(prev), 1e-12);
      if (change < cfg.tol && it.max_slack < cfg.slack_tol) break;
    }
    prev = it.objective;
  }

  if (last_x.size() > 0) {
    try {
      rep.plan = normalize_plan(layout, last_x, cfg.sms_deviation_tol);
    } catch (const SolverError& e) {
      rep.error = e.what();
      rep.wallclock_s = seconds_since(t0);
      return rep;
    }
    rep.plan.validate(K, channels.surface_elements(), cfg.budget);
    rep.solver_tau.resize(K);
    for (std::size_t k = 0; k < K; ++k) rep.solver_tau[k] = last_x[layout.tau(k)];
    // Snr of the normalized plan, then the exact max-min split of the frame.
    std::vector<double> snr(K);
    const auto& meta = channels.meta();
    for (std::size_t k = 0; k < K; ++k) {
      snr[k] = metasurf::snr(effective_channel(channels, rep.plan, k), meta.tx_power_watt, meta.bandwidth_hz,
                             meta.noise_psd_watt_per_hz);
    }
    rep.allocation = max_min_allocation(snr, meta.bandwidth_hz, tau_min);
    rep.evaluation = evaluate_plan(channels, rep.plan, rep.allocation);
    rep.has_plan = true;
  }
  rep.wallclock_s = seconds_since(t0);
  return rep;
}

SolveReport assemble(std::size_t budget, std::vector<StartReport> starts, double wallclock) {
  SolveReport out;
  out.budget = budget;
  out.starts = std::move(starts);
  out.status = conic::SolveStatus::Optimal;
  for (const auto& s : out.starts) {
    if (!s.completed()) {
      out.status = s.status;
      break;
    }
  }
  out.best = out.starts.size();
  for (std::size_t i = 0; i < out.starts.size(); ++i) {
    const auto& s = out.starts[i];
    if (!s.has_plan) continue;
    if (out.best == out.starts.size() ||
        s.evaluation.min_rate_bps > out.starts[out.best].evaluation.min_rate_bps) {
      out.best = i;
    }
  }
  if (out.best == out.starts.size()) out.best = 0;
  out.wallclock_s = wallclock;
  return out;
}

std::vector<QuadData> all_quads(const ChannelSet& channels) {
  std::vector<QuadData> quads;
  for (std::size_t k = 0; k < channels.num_ues(); ++k) quads.push_back(quad_data(channels, k));
  return quads;
}

}  // namespace

double DeployConfig::effective_tau_min(std::size_t num_ues) const {
  return tau_min > 0.0 ? tau_min : 1.0 / (2.0 * static_cast<double>(num_ues));
}

void DeployConfig::validate(std::size_t num_ues, std::size_t num_surfaces) const {
  if (budget > num_surfaces) {
    throw ConfigError("budget: L_max = " + std::to_string(budget) + " exceeds the " + std::to_string(num_surfaces) +
                      " candidate surfaces");
  }
  if (max_iters < 1) throw ConfigError("max_iters: must be at least 1");
  if (!(omega >= 10.0)) throw ConfigError("omega: penalty must be >= 10");
  if (!(tau_min >= 0.0 && tau_min < 1.0)) throw ConfigError("tau_min: must be in [0, 1)");
  if (effective_tau_min(num_ues) * static_cast<double>(num_ues) > 1.0 + 1e-12) {
    throw ConfigError("tau_min: K * tau_min exceeds the unit frame");
  }
  if (starts < 1) throw ConfigError("starts: must be at least 1");
  if (!(tol > 0.0)) throw ConfigError("tol: must be positive");
  if (!(mip.solver.tol > 0.0 && mip.solver.tol <= 1e-2)) throw ConfigError("solver.tol: must be in (0, 1e-2]");
}

Iterate init_iterate(const ChannelSet& channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const auto lm = static_cast<Eigen::Index>(channels.num_surfaces() * channels.surface_elements());
  Iterate it;
  for (std::size_t k = 0; k < channels.num_ues(); ++k) {
    CVector z(lm);
    for (auto& e : z) e = std::polar(1.0, phase(rng));
    it.z.push_back(std::move(z));
  }
  return it;
}

std::uint64_t start_seed(std::uint64_t seed, std::size_t entry, std::size_t start) {
  return splitmix64(splitmix64(splitmix64(seed) ^ entry) ^ start);
}

Allocation max_min_allocation(const std::vector<double>& snr, double bandwidth_hz, double tau_min) {
  const std::size_t K = snr.size();
  if (K == 0) throw DimensionError("max_min_allocation: no UEs");
  if (!(tau_min >= 0.0) || tau_min * static_cast<double>(K) > 1.0 + 1e-12) {
    throw ConfigError("tau_min: K * tau_min exceeds the unit frame");
  }
  std::vector<double> rho(K);
  for (std::size_t k = 0; k < K; ++k) {
    rho[k] = bandwidth_hz * std::log2(1.0 + snr[k]);
    if (!(rho[k] > 0.0)) throw UnreachableUe(k);
  }
  // tau_k(t) = max(tau_min, t / rho_k) with sum 1. UEs in ascending rho order
  // leave the tau_min floor first; grow that set until the level is consistent.
  std::vector<std::size_t> order(K);
  for (std::size_t k = 0; k < K; ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rho[a] < rho[b]; });
  double level = 0.0, inv_sum = 0.0;
  for (std::size_t n = 1; n <= K; ++n) {
    inv_sum += 1.0 / rho[order[n - 1]];
    level = (1.0 - static_cast<double>(K - n) * tau_min) / inv_sum;
    // Consistent when the next UE would still sit on the floor.
    if (n == K || level <= tau_min * rho[order[n]]) break;
  }
  Allocation a;
  a.tau.resize(K);
  for (std::size_t k = 0; k < K; ++k) a.tau[k] = std::max(tau_min, level / rho[k]);
  return a;
}

SurfacePlan normalize_plan(const VariableLayout& v, const RVector& x, double sms_deviation_tol) {
  const std::size_t K = v.num_ues(), L = v.num_surfaces(), M = v.elements();
  const auto m = static_cast<Eigen::Index>(M);
  SurfacePlan plan;
  plan.alpha.assign(L, 0);
  plan.ris_phases.assign(L, {});
  plan.sms_phases.assign(L, CVector());
  for (std::size_t l = 0; l < L; ++l) {
    const double a = x[v.alpha(l)];
    if (std::abs(a - std::round(a)) > 1e-6) {
      throw SolverError("normalize_plan: alpha_" + std::to_string(l) + " = " + std::to_string(a) + " is not binary");
    }
    auto entry = [&](std::size_t k, std::size_t e) {
      const Eigen::Index c = v.z(l, k, e);
      return Complex(x[c], x[c + 1]);
    };
    if (a > 0.5) {
      plan.alpha[l] = 1;
      for (std::size_t k = 0; k < K; ++k) {
        CVector phi(m);
        for (std::size_t e = 0; e < M; ++e) phi[static_cast<Eigen::Index>(e)] = unit_phase(entry(k, e));
        plan.ris_phases[l].push_back(std::move(phi));
      }
    } else {
      CVector theta(m);
      for (std::size_t e = 0; e < M; ++e) {
        Complex mean = 0.0;
        for (std::size_t k = 0; k < K; ++k) mean += entry(k, e);
        mean /= static_cast<double>(K);
        for (std::size_t k = 0; k < K; ++k) {
          const double dev = std::abs(entry(k, e) - mean);
          if (dev > sms_deviation_tol) {
            throw SolverError("normalize_plan: SMS " + std::to_string(l) + " differs across UEs by " +
                              std::to_string(dev));
          }
        }
        theta[static_cast<Eigen::Index>(e)] = unit_phase(mean);
      }
      plan.sms_phases[l] = std::move(theta);
    }
  }
  return plan;
}

SolveReport run_fpp_sca(const ChannelSet& channels, const DeployConfig& cfg) {
  auto reports = sweep_budget(channels, {cfg.budget}, cfg);
  return std::move(reports.front());
}

std::vector<SolveReport> sweep_budget(const ChannelSet& channels, const std::vector<std::size_t>& budgets,
                                      const DeployConfig& cfg) {
  if (budgets.empty()) throw ConfigError("budgets: list is empty");
  if (!std::is_sorted(budgets.begin(), budgets.end())) throw ConfigError("budgets: must be sorted ascending");
  for (std::size_t b : budgets) {
    DeployConfig c = cfg;
    c.budget = b;
    c.validate(channels.num_ues(), channels.num_surfaces());
  }
  const auto quads = all_quads(channels);
  const auto starts = static_cast<std::size_t>(cfg.starts);
  const std::size_t tasks = budgets.size() * starts;
  std::vector<StartReport> results(tasks);
  parallel_for(tasks, cfg.threads, [&](std::size_t t) {
    const std::size_t entry = t / starts, start = t % starts;
    DeployConfig c = cfg;
    c.budget = budgets[entry];
    results[t] = run_start(channels, quads, c, start, start_seed(cfg.seed, entry, start));
  });

  std::vector<SolveReport> out;
  for (std::size_t e = 0; e < budgets.size(); ++e) {
    std::vector<StartReport> group(std::make_move_iterator(results.begin() + static_cast<std::ptrdiff_t>(e * starts)),
                                   std::make_move_iterator(results.begin() + static_cast<std::ptrdiff_t>((e + 1) * starts)));
    double wall = 0.0;
    for (const auto& s : group) wall += s.wallclock_s;
    out.push_back(assemble(budgets[e], std::move(group), wall));
    out.back().marginal_gain_bps = e == 0 ? 0.0 : out[e].min_rate_bps() - out[e - 1].min_rate_bps();
  }
  return out;
}

}  // namespace metasurf
