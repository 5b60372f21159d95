// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "metasurf/types.hpp"

namespace metasurf::conic {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

enum class ConeKind { Zero, NonNeg, SecondOrder, Exponential };

/// One block of the product cone. SecondOrder is {(t, u) : ||u|| <= t};
/// Exponential is closure{(a, b, c) : b > 0, b exp(a / b) <= c}.
struct ConeBlock {
  ConeKind kind = ConeKind::NonNeg;
  Eigen::Index dim = 0;

  static ConeBlock zero(Eigen::Index n) { return {ConeKind::Zero, n}; }
  static ConeBlock nonneg(Eigen::Index n) { return {ConeKind::NonNeg, n}; }
  static ConeBlock soc(Eigen::Index n) { return {ConeKind::SecondOrder, n}; }
  static ConeBlock exp() { return {ConeKind::Exponential, 3}; }
};

std::string to_string(ConeKind kind);

/// minimize c'x  subject to  A x + s = b,  s in K,  lower <= x <= upper.
struct ConicProblem {
  RVector c;
  SparseMatrix A;
  RVector b;
  std::vector<ConeBlock> cones;
  /// Optional per-variable box; empty vectors mean unbounded. +-inf entries allowed.
  RVector lower;
  RVector upper;

  Eigen::Index num_vars() const { return c.size(); }
  Eigen::Index num_rows() const { return b.size(); }
  bool has_bounds() const { return lower.size() > 0 || upper.size() > 0; }
  /// Ensures lower/upper are allocated (filled with -inf/+inf).
  void ensure_bounds();
  /// Throws DimensionError / ConfigError on malformed data.
  void validate() const;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, MaxIter };

std::string to_string(SolveStatus status);

struct ConicSolution {
  SolveStatus status = SolveStatus::MaxIter;
  RVector x;
  RVector y;  // duals of the original rows
  RVector s;  // slacks of the original rows
  double objective = 0.0;
  // Relative residuals, comparable with SolverSettings::tol.
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double duality_gap = 0.0;
  int iterations = 0;

  bool optimal() const { return status == SolveStatus::Optimal; }
};

enum class ConicMethod {
  /// Operator splitting on the homogeneous self-dual embedding.
  Splitting,
  /// Homogeneous primal-dual interior-point method; ignores warm starts.
  InteriorPoint,
};

struct SolverSettings {
  ConicMethod method = ConicMethod::Splitting;
  double tol = 1e-7;
  int max_iter = 100000;
  /// Over-relaxation factor in (0, 2).
  double relaxation = 1.5;
  /// Ruiz equilibration passes; 0 disables row/column scaling.
  int equilibration_passes = 15;
  /// Residuals are checked every `check_interval` iterations.
  int check_interval = 10;
  /// Anderson acceleration memory; 0 disables it.
  int anderson_memory = 8;
  /// Primal proximal weight of the splitting metric.
  double rho_x = 1e-6;
  /// Initial dual scale; adapted every few hundred iterations when enabled.
  double scale = 0.1;
  bool adaptive_scale = true;
  /// Iteration cap of the interior-point method.
  int ipm_max_iter = 100;
  /// Bound on the barrier proximity F(s) + F*(z) + 3 log(s'z/3) + 3 of each
  /// exponential block along interior-point steps.
  double ipm_proximity = 2.0;
};

/// Optional initial point in original (unscaled) space. y and s cover the
/// original rows only; missing parts start at zero.
struct WarmStart {
  RVector x;
  RVector y;
  RVector s;
};

/// Euclidean projection onto one cone block.
RVector project_cone(const RVector& v, const ConeBlock& cone);
/// Projection onto the dual cone (free for Zero, self-dual for NonNeg/SOC).
RVector project_dual_cone(const RVector& v, const ConeBlock& cone);

/// In-place projection of a length-3 span onto the exponential cone.
void project_exp_inplace(double* v);

/// Membership with absolute tolerance.
bool in_cone(const RVector& v, const ConeBlock& cone, double tol);
bool in_dual_cone(const RVector& v, const ConeBlock& cone, double tol);

/// Operator-splitting solver on the homogeneous self-dual embedding.
/// Deterministic for fixed inputs; single-threaded.
ConicSolution solve_conic(const ConicProblem& problem, const SolverSettings& settings = {},
                          const WarmStart* warm = nullptr);

/// Structured-text problem dump for bug reports.
void save_problem(const ConicProblem& problem, const std::filesystem::path& path);
ConicProblem load_problem(const std::filesystem::path& path);

}  // namespace metasurf::conic
