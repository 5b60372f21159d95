// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metasurf/channel.hpp"
#include "metasurf/conic.hpp"
#include "metasurf/mibb.hpp"
#include "metasurf/p3.hpp"
#include "metasurf/radio.hpp"

namespace metasurf {

struct DeployConfig {
  std::size_t budget = 0;  // L_max
  int max_iters = 8;       // I
  double omega = 100.0;
  /// Minimum time portion; 0 selects 1 / (2K).
  double tau_min = 0.0;
  int starts = 3;
  std::uint64_t seed = 1;
  /// Early stop on relative objective change (together with vanishing slacks).
  double tol = 1e-4;
  /// Slack level below which the early stop may trigger.
  double slack_tol = 1e-6;
  /// Largest cross-UE spread tolerated when extracting SMS phases.
  double sms_deviation_tol = 1e-4;
  mibb::MipSettings mip;
  /// Worker threads for starts and sweep entries; 0 uses the hardware count.
  unsigned threads = 0;

  double effective_tau_min(std::size_t num_ues) const;
  /// Throws ConfigError naming the offending field.
  void validate(std::size_t num_ues, std::size_t num_surfaces) const;
};

struct IterationRecord {
  double objective = 0.0;  // r_min - omega * sum_k s_k
  double r_min = 0.0;      // per-Hz units: R_min = B r_min^2
  double max_slack = 0.0;
  std::size_t mip_nodes = 0;
  bool proven_optimal = false;
  double build_s = 0.0;
  double solve_s = 0.0;
};

/// One FPP-SCA start from a random unit-modulus iterate.
struct StartReport {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  conic::SolveStatus status = conic::SolveStatus::MaxIter;
  std::vector<IterationRecord> iterations;
  bool has_plan = false;
  SurfacePlan plan;
  Allocation allocation;
  /// Time portions returned by the last conic solve, before reallocation.
  std::vector<double> solver_tau;
  PlanEvaluation evaluation;
  double wallclock_s = 0.0;
  /// Set when plan extraction failed after the solves finished.
  std::string error;

  bool completed() const { return status == conic::SolveStatus::Optimal && error.empty(); }
};

struct SolveReport {
  std::size_t budget = 0;
  std::vector<StartReport> starts;
  /// Index into `starts` of the winner (highest recomputed min rate).
  std::size_t best = 0;
  /// First non-optimal solver status among the starts, else Optimal.
  /// Extraction failures show up in complete() only.
  conic::SolveStatus status = conic::SolveStatus::MaxIter;
  /// Change of the best min rate relative to the previous sweep entry.
  double marginal_gain_bps = 0.0;
  double wallclock_s = 0.0;

  bool complete() const {
    for (const auto& s : starts) {
      if (!s.completed()) return false;
    }
    return true;
  }
  bool has_plan() const { return best < starts.size() && starts[best].has_plan; }
  const StartReport& winner() const { return starts.at(best); }
  double min_rate_bps() const { return has_plan() ? winner().evaluation.min_rate_bps : 0.0; }
};

/// Unit-modulus random iterate, entries e^{j theta}, theta ~ U[0, 2 pi).
Iterate init_iterate(const ChannelSet& channels, std::uint64_t seed);

/// Seed of start `start` of sweep entry `entry`.
std::uint64_t start_seed(std::uint64_t seed, std::size_t entry, std::size_t start);

/// Max-min time allocation for fixed SNRs: maximizes min_k tau_k B log2(1 + snr_k)
/// subject to sum tau = 1 and tau_k >= tau_min. Every UE above tau_min gets
/// the same rate.
Allocation max_min_allocation(const std::vector<double>& snr, double bandwidth_hz, double tau_min);

/// Unit-modulus plan from a relaxed solution: RIS entries per UE, SMS entries
/// averaged across UEs. Entries below 1e-9 in magnitude get phase 0.
SurfacePlan normalize_plan(const VariableLayout& layout, const RVector& x, double sms_deviation_tol = 1e-4);

/// Runs every start of one budget and keeps the best.
SolveReport run_fpp_sca(const ChannelSet& channels, const DeployConfig& cfg);

/// One run per budget (ascending), with independent start seeds per entry.
std::vector<SolveReport> sweep_budget(const ChannelSet& channels, const std::vector<std::size_t>& budgets,
                                      const DeployConfig& cfg);

}  // namespace metasurf
