// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "metasurf/conic.hpp"

namespace metasurf::conic::detail {

/// Problem with variable boxes turned into extra cone rows appended after the
/// original ones.
struct Lowered {
  SparseMatrix A;
  RVector b;
  RVector c;
  std::vector<ConeBlock> cones;
  Eigen::Index original_rows = 0;
};

Lowered lower_problem(const ConicProblem& p);

double inf_norm(const RVector& v);

void project_blocks(Eigen::Ref<RVector> v, const std::vector<ConeBlock>& cones, bool dual);

/// Ruiz equilibration; SOC and Exp blocks share one row scale so the cones are
/// preserved. A <- diag(D) A diag(E).
void equilibrate(SparseMatrix& A, const std::vector<ConeBlock>& cones, int passes, RVector& D, RVector& E);

ConicSolution solve_interior(const Lowered& problem, const SolverSettings& settings);

}  // namespace metasurf::conic::detail
