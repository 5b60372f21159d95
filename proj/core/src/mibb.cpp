// SPDX-License-Identifier: Apache-2.0
#include "metasurf/mibb.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <string>

namespace metasurf::mibb {

using conic::ConicProblem;
using conic::ConicSolution;
using conic::SolveStatus;

std::size_t pattern_count(std::size_t n, std::size_t budget) {
  // sum_{i <= budget} C(n, i), saturating.
  const std::size_t cap = std::numeric_limits<std::size_t>::max();
  std::size_t total = 0, term = 1;
  for (std::size_t i = 0; i <= std::min(n, budget); ++i) {
    if (total > cap - term) return cap;
    total += term;
    // term = C(n, i + 1) = C(n, i) (n - i) / (i + 1), computed without overflow for small n.
    const double next = static_cast<double>(term) * static_cast<double>(n - i) / static_cast<double>(i + 1);
    term = next >= static_cast<double>(cap) ? cap : static_cast<std::size_t>(std::llround(next));
  }
  return total;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Open {
  MipNode node;
  Eigen::Index branch = -1;  // position in the binary list
  double frac = 0.0;
};

struct OpenOrder {
  bool operator()(const Open& a, const Open& b) const {
    if (a.node.bound != b.node.bound) return a.node.bound > b.node.bound;
    return a.node.id > b.node.id;
  }
};

class Search {
 public:
  Search(const ConicProblem& problem, const std::vector<Eigen::Index>& binaries, std::size_t budget,
         const MipSettings& settings)
      : base_(problem), bin_(binaries), budget_(budget), settings_(settings) {
    base_.validate();
    base_.ensure_bounds();
    if (!(settings_.integrality_tol > 0.0 && settings_.integrality_tol < 0.5)) {
      throw ConfigError("integrality_tol: must be in (0, 0.5)");
    }
    if (!(settings_.prune_tol >= 0.0)) throw ConfigError("prune_tol: must be nonnegative");
    if (settings_.node_limit == 0) throw ConfigError("node_limit: must be positive");
    std::vector<Eigen::Index> sorted = bin_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ConfigError("binary_idx: duplicate index");
    }
    for (Eigen::Index j : bin_) {
      if (j < 0 || j >= base_.num_vars()) throw DimensionError("binary_idx: index out of range");
      const double lo = base_.lower[j], hi = base_.upper[j];
      const bool lo_ok = lo == 0.0 || lo == 1.0, hi_ok = hi == 0.0 || hi == 1.0;
      if (!lo_ok || !hi_ok || lo > hi) {
        throw ConfigError("binary_idx: variable " + std::to_string(j) + " must carry a box within [0, 1]");
      }
    }
    if (budget_ < bin_.size()) add_budget_row();
  }

  MipResult run() {
    if (settings_.exhaustive) return enumerate();
    MipResult out;
    MipNode root;
    for (std::size_t i = 0; i < bin_.size(); ++i) {
      const Eigen::Index j = bin_[i];
      if (base_.upper[j] == 0.0) root.fixed_zero.push_back(static_cast<Eigen::Index>(i));
      else if (base_.lower[j] == 1.0) root.fixed_one.push_back(static_cast<Eigen::Index>(i));
    }
    if (!propagate(root)) {
      out.solution.status = SolveStatus::Infeasible;
      return out;
    }
    const ConicSolution rs = relax(root, out);
    record(out, root, root.id, NodeRecord::Outcome::Branched, rs);
    if (rs.status == SolveStatus::Infeasible || rs.status == SolveStatus::Unbounded ||
        rs.status == SolveStatus::MaxIter) {
      out.solution = rs;
      out.best_bound = rs.status == SolveStatus::Infeasible ? kInf : -kInf;
      if (!out.trace.empty()) {
        out.trace.back().outcome =
            rs.status == SolveStatus::Infeasible ? NodeRecord::Outcome::Infeasible : NodeRecord::Outcome::Failed;
      }
      return out;
    }
    root.bound = rs.objective;
    if (branch_choice(rs.x).first >= 0) round_heuristic(rs.x, out);

    std::priority_queue<Open, std::vector<Open>, OpenOrder> open;
    bool complete = true;
    consider(root, rs, open, out, complete);
    while (!open.empty()) {
      Open cur = open.top();
      if (cur.node.bound >= incumbent_value() - settings_.prune_tol) break;  // best-first: all rest prunable
      if (out.nodes >= settings_.node_limit) {
        complete = false;
        break;
      }
      open.pop();
      for (int side = 0; side < 2; ++side) {
        MipNode child;
        child.fixed_zero = cur.node.fixed_zero;
        child.fixed_one = cur.node.fixed_one;
        (side == 0 ? child.fixed_zero : child.fixed_one).push_back(cur.branch);
        child.depth = cur.node.depth + 1;
        child.id = next_id_++;
        child.bound = cur.node.bound;
        if (!propagate(child)) {
          record_plain(out, child, cur.node.id, NodeRecord::Outcome::Infeasible);
          continue;
        }
        const ConicSolution cs = relax(child, out);
        if (cs.status == SolveStatus::Infeasible) {
          record(out, child, cur.node.id, NodeRecord::Outcome::Infeasible, cs);
          continue;
        }
        if (cs.status != SolveStatus::Optimal) {
          // Unreliable bound: keep the parent's, which is still valid.
          complete = false;
          record(out, child, cur.node.id, NodeRecord::Outcome::Failed, cs);
          if (cs.x.size() == base_.num_vars() && cs.x.allFinite()) consider(child, cs, open, out, complete, false);
          else consider_unsolved(child, open);
          continue;
        }
        // A child's relaxation cannot beat its parent's.
        child.bound = std::max(cs.objective, cur.node.bound);
        record(out, child, cur.node.id, NodeRecord::Outcome::Branched, cs);
        consider(child, cs, open, out, complete);
      }
    }

    double bound = incumbent_value();
    if (!open.empty()) bound = std::min(bound, open.top().node.bound);
    out.best_bound = bound;
    out.proven_optimal = complete && have_incumbent_ && (open.empty() || open.top().node.bound >=
                                                                             incumbent_value() - settings_.prune_tol);
    if (have_incumbent_) {
      out.solution = incumbent_;
    } else {
      out.solution.status = complete ? SolveStatus::Infeasible : SolveStatus::MaxIter;
      out.best_bound = complete ? kInf : bound;
    }
    return out;
  }

 private:
  void add_budget_row() {
    const Eigen::Index m = base_.num_rows();
    // Budget row goes into a trailing NonNeg block.
    std::vector<conic::Triplet> t;
    t.reserve(static_cast<std::size_t>(base_.A.nonZeros()) + bin_.size());
    for (Eigen::Index k = 0; k < base_.A.outerSize(); ++k) {
      for (conic::SparseMatrix::InnerIterator it(base_.A, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    }
    for (Eigen::Index j : bin_) t.emplace_back(m, j, 1.0);
    conic::SparseMatrix A(m + 1, base_.num_vars());
    A.setFromTriplets(t.begin(), t.end());
    base_.A = std::move(A);
    base_.b.conservativeResize(m + 1);
    base_.b[m] = static_cast<double>(budget_);
    base_.cones.push_back(conic::ConeBlock::nonneg(1));
  }

  /// Fixes the remaining binaries to zero once the budget is exhausted.
  bool propagate(MipNode& node) const {
    if (node.fixed_one.size() > budget_) return false;
    if (node.fixed_one.size() == budget_) {
      std::vector<char> fixed(bin_.size(), 0);
      for (auto i : node.fixed_zero) fixed[static_cast<std::size_t>(i)] = 1;
      for (auto i : node.fixed_one) fixed[static_cast<std::size_t>(i)] = 1;
      for (std::size_t i = 0; i < bin_.size(); ++i) {
        if (!fixed[i]) node.fixed_zero.push_back(static_cast<Eigen::Index>(i));
      }
    }
    return true;
  }

  ConicSolution solve_with(const std::vector<Eigen::Index>& zeros, const std::vector<Eigen::Index>& ones,
                           MipResult& out) const {
    ConicProblem p = base_;
    for (auto i : zeros) p.lower[bin_[static_cast<std::size_t>(i)]] = p.upper[bin_[static_cast<std::size_t>(i)]] = 0.0;
    for (auto i : ones) p.lower[bin_[static_cast<std::size_t>(i)]] = p.upper[bin_[static_cast<std::size_t>(i)]] = 1.0;
    ++out.relaxations;
    ConicSolution sol = conic::solve_conic(p, settings_.solver);
    // Loosen in steps of 100x so a relaxation that stalls just short of the
    // target keeps as much accuracy as it can reach.
    const double cap = std::min(settings_.retry_tol, 1e-2);
    auto loose = settings_.solver;
    while (sol.status == SolveStatus::MaxIter && loose.tol < cap) {
      loose.tol = std::min(loose.tol * 100.0, cap);
      ++out.relaxations;
      sol = conic::solve_conic(p, loose);
    }
    return sol;
  }

  ConicSolution relax(const MipNode& node, MipResult& out) {
    ++out.nodes;
    return solve_with(node.fixed_zero, node.fixed_one, out);
  }

  double incumbent_value() const { return have_incumbent_ ? incumbent_.objective : kInf; }

  /// Solves with every binary fixed to `pattern` and keeps the result if it improves.
  SolveStatus try_pattern(const std::vector<char>& pattern, MipResult& out) {
    std::vector<Eigen::Index> zeros, ones;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
      (pattern[i] ? ones : zeros).push_back(static_cast<Eigen::Index>(i));
    }
    if (ones.size() > budget_) return SolveStatus::Infeasible;
    ConicSolution sol = solve_with(zeros, ones, out);
    const SolveStatus status = sol.status;
    if (status != SolveStatus::Optimal) return status;
    for (std::size_t i = 0; i < pattern.size(); ++i) sol.x[bin_[i]] = pattern[i] ? 1.0 : 0.0;
    if (!have_incumbent_ || sol.objective < incumbent_.objective) {
      incumbent_ = std::move(sol);
      have_incumbent_ = true;
    }
    return status;
  }

  void round_heuristic(const RVector& x, MipResult& out) {
    std::vector<std::size_t> order(bin_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[bin_[a]] > x[bin_[b]]; });
    std::vector<char> pattern(bin_.size(), 0);
    std::size_t used = 0;
    for (std::size_t i : order) {
      if (used < budget_ && x[bin_[i]] >= 0.5) {
        pattern[i] = 1;
        ++used;
      }
    }
    // A failed heuristic only costs an incumbent, never the proof.
    (void)try_pattern(pattern, out);
  }

  /// Most fractional free binary, or -1 when the point is integral.
  std::pair<Eigen::Index, double> branch_choice(const RVector& x) const {
    Eigen::Index best = -1;
    double best_frac = settings_.integrality_tol;
    for (std::size_t i = 0; i < bin_.size(); ++i) {
      const double v = x[bin_[i]];
      const double frac = std::min(std::abs(v), std::abs(1.0 - v));
      if (frac > best_frac) {
        best_frac = frac;
        best = static_cast<Eigen::Index>(i);
      }
    }
    return {best, best_frac};
  }

  void consider(const MipNode& node, const ConicSolution& sol, std::priority_queue<Open, std::vector<Open>, OpenOrder>& open,
                MipResult& out, bool& complete, bool reliable = true) {
    const auto [branch, frac] = branch_choice(sol.x);
    if (branch < 0) {
      std::vector<char> pattern(bin_.size(), 0);
      for (std::size_t i = 0; i < bin_.size(); ++i) pattern[i] = sol.x[bin_[i]] > 0.5 ? 1 : 0;
      const SolveStatus st = try_pattern(pattern, out);
      if (!out.trace.empty() && reliable) out.trace.back().outcome = NodeRecord::Outcome::Integral;
      if (!reliable || st != SolveStatus::Optimal) complete = false;
      return;
    }
    if (reliable && node.bound >= incumbent_value() - settings_.prune_tol) {
      if (!out.trace.empty()) out.trace.back().outcome = NodeRecord::Outcome::Pruned;
      return;
    }
    open.push(Open{node, branch, frac});
  }

  void consider_unsolved(const MipNode& node, std::priority_queue<Open, std::vector<Open>, OpenOrder>& open) {
    std::vector<char> fixed(bin_.size(), 0);
    for (auto i : node.fixed_zero) fixed[static_cast<std::size_t>(i)] = 1;
    for (auto i : node.fixed_one) fixed[static_cast<std::size_t>(i)] = 1;
    for (std::size_t i = 0; i < bin_.size(); ++i) {
      if (!fixed[i]) {
        open.push(Open{node, static_cast<Eigen::Index>(i), 0.0});
        return;
      }
    }
  }

  void record(MipResult& out, const MipNode& node, std::size_t parent, NodeRecord::Outcome outcome,
              const ConicSolution& sol) const {
    if (!settings_.record_trace) return;
    NodeRecord r;
    r.id = node.id;
    r.parent = parent;
    r.depth = node.depth;
    r.bound = sol.status == SolveStatus::Optimal ? sol.objective : node.bound;
    r.outcome = outcome;
    out.trace.push_back(r);
  }

  void record_plain(MipResult& out, const MipNode& node, std::size_t parent, NodeRecord::Outcome outcome) const {
    if (!settings_.record_trace) return;
    out.trace.push_back(NodeRecord{node.id, parent, node.depth, kInf, outcome});
  }

  MipResult enumerate() {
    MipResult out;
    const std::size_t n = bin_.size();
    if (n >= 63 || pattern_count(n, budget_) > settings_.exhaustive_limit) {
      throw ConfigError("exhaustive: " + std::to_string(pattern_count(n, budget_)) + " patterns exceed the limit of " +
                        std::to_string(settings_.exhaustive_limit));
    }
    bool failures = false;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
      if (static_cast<std::size_t>(std::popcount(mask)) > budget_) continue;
      std::vector<char> pattern(n, 0);
      bool respects_box = true;
      for (std::size_t i = 0; i < n; ++i) {
        pattern[i] = (mask >> i) & 1u ? 1 : 0;
        const Eigen::Index j = bin_[i];
        if ((pattern[i] && base_.upper[j] == 0.0) || (!pattern[i] && base_.lower[j] == 1.0)) respects_box = false;
      }
      if (!respects_box) continue;
      ++out.nodes;
      const SolveStatus st = try_pattern(pattern, out);
      if (st == SolveStatus::MaxIter || st == SolveStatus::Unbounded) failures = true;
    }
    out.proven_optimal = have_incumbent_ && !failures;
    if (have_incumbent_) {
      out.solution = incumbent_;
      out.best_bound = incumbent_.objective;
    } else {
      out.solution.status = failures ? SolveStatus::MaxIter : SolveStatus::Infeasible;
      out.best_bound = failures ? -kInf : kInf;
    }
    return out;
  }

  ConicProblem base_;
  std::vector<Eigen::Index> bin_;
  std::size_t budget_;
  MipSettings settings_;
  ConicSolution incumbent_;
  bool have_incumbent_ = false;
  std::size_t next_id_ = 1;
};

}  // namespace

MipResult solve_mi_conic(const ConicProblem& problem, const std::vector<Eigen::Index>& binary_idx, std::size_t budget,
                         const MipSettings& settings) {
  return Search(problem, binary_idx, budget, settings).run();
}

}  // namespace metasurf::mibb
