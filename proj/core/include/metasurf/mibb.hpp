// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "metasurf/conic.hpp"

namespace metasurf::mibb {

struct MipSettings {
  /// Relaxation solver. The interior-point method is the default because
  /// branch-and-bound solves many small, similar relaxations. The tight
  /// tolerance keeps per-Hz rates accurate well below 1e-6.
  conic::SolverSettings solver = [] {
    conic::SolverSettings s;
    s.method = conic::ConicMethod::InteriorPoint;
    s.tol = 1e-9;
    return s;
  }();
  /// Loosest tolerance reached by the retries after a relaxation hits its iteration cap.
  double retry_tol = 1e-5;
  double integrality_tol = 1e-6;
  /// Absolute pruning tolerance on the (minimization) objective.
  double prune_tol = 1e-6;
  std::size_t node_limit = 50000;
  /// Enumerate every pattern with at most `budget` ones instead of branching.
  bool exhaustive = false;
  /// Largest pattern count accepted by exhaustive mode.
  std::size_t exhaustive_limit = 4096;
  /// Record every evaluated node in MipResult::trace.
  bool record_trace = false;
};

/// Branch-and-bound node: binaries fixed to zero / one plus its relaxation
/// value. Fixed sets hold positions in the binary index list.
struct MipNode {
  std::vector<Eigen::Index> fixed_zero;
  std::vector<Eigen::Index> fixed_one;
  double bound = 0.0;  // relaxation objective (minimization)
  int depth = 0;
  std::size_t id = 0;
};

struct NodeRecord {
  enum class Outcome { Branched, Integral, Pruned, Infeasible, Failed };
  std::size_t id = 0;
  std::size_t parent = 0;  // equals id for the root
  int depth = 0;
  double bound = 0.0;
  Outcome outcome = Outcome::Failed;
};

struct MipResult {
  /// Status and point of the best integral solution. Optimal means an
  /// incumbent was found; `proven_optimal` says whether the search closed.
  conic::ConicSolution solution;
  bool proven_optimal = false;
  /// Lower bound on the optimum (minimization) over unexplored nodes.
  double best_bound = 0.0;
  std::size_t nodes = 0;
  std::size_t relaxations = 0;
  std::vector<NodeRecord> trace;
};

/// Minimizes c'x over the conic feasible set with x[j] in {0, 1} for every j
/// in `binary_idx` and at most `budget` of them equal to one. Each binary must
/// carry the box [0, 1] in `problem`. Best-first branch-and-bound on the most
/// fractional binary, ties broken by index and node id, so results do not
/// depend on timing.
MipResult solve_mi_conic(const conic::ConicProblem& problem, const std::vector<Eigen::Index>& binary_idx,
                         std::size_t budget, const MipSettings& settings = {});

/// Number of 0/1 patterns over n binaries with at most `budget` ones.
std::size_t pattern_count(std::size_t n, std::size_t budget);

}  // namespace metasurf::mibb
