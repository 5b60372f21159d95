// SPDX-License-Identifier: Apache-2.0
//
// Operator splitting on the homogeneous self-dual embedding
//
//   Q = [ 0   A'  c ]     find (u, v) with v = Q u,
//       [-A   0   b ]     u = (x, y, tau) in R^n x K* x R+,
//       [-c' -b'  0 ]     v = (r, s, kappa) in {0}^n x K x R+.
//
// Douglas-Rachford in a diagonal metric R: each iteration solves one linear
// system with R + Q (factored through rho_x I + A' R_y^{-1} A), projects onto
// the cone product and relaxes. The dual weight is rescaled when the primal
// and dual residuals drift apart. Anderson acceleration (type II,
// safeguarded) runs on the splitting iterate.
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "conic_internal.hpp"

namespace metasurf::conic {

void ConicProblem::ensure_bounds() {
  const double inf = std::numeric_limits<double>::infinity();
  if (lower.size() == 0) lower = RVector::Constant(num_vars(), -inf);
  if (upper.size() == 0) upper = RVector::Constant(num_vars(), inf);
}

void ConicProblem::validate() const {
  if (A.rows() != b.size()) throw DimensionError("conic problem: rows(A) != len(b)");
  if (A.cols() != c.size()) throw DimensionError("conic problem: cols(A) != len(c)");
  Eigen::Index total = 0;
  for (const auto& cone : cones) {
    if (cone.dim < 0) throw DimensionError("conic problem: negative cone dimension");
    if (cone.kind == ConeKind::SecondOrder && cone.dim < 2) throw DimensionError("conic problem: SOC dim < 2");
    if (cone.kind == ConeKind::Exponential && cone.dim != 3) throw DimensionError("conic problem: Exp dim != 3");
    total += cone.dim;
  }
  if (total != b.size()) throw DimensionError("conic problem: cone dimensions do not sum to rows(A)");
  for (Eigen::Index k = 0; k < A.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
      if (!std::isfinite(it.value())) throw DimensionError("conic problem: non-finite entry in A");
    }
  }
  if (!b.allFinite() || !c.allFinite()) throw DimensionError("conic problem: non-finite entry in b or c");
  if (lower.size() != 0 && lower.size() != c.size()) throw DimensionError("conic problem: lower bound length");
  if (upper.size() != 0 && upper.size() != c.size()) throw DimensionError("conic problem: upper bound length");
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (std::isnan(lower[i]) || lower[i] == std::numeric_limits<double>::infinity()) {
      throw ConfigError("conic problem: invalid lower bound");
    }
  }
  for (Eigen::Index i = 0; i < upper.size(); ++i) {
    if (std::isnan(upper[i]) || upper[i] == -std::numeric_limits<double>::infinity()) {
      throw ConfigError("conic problem: invalid upper bound");
    }
    if (lower.size() != 0 && lower[i] > upper[i]) throw ConfigError("conic problem: lower bound above upper bound");
  }
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal:
      return "optimal";
    case SolveStatus::Infeasible:
      return "infeasible";
    case SolveStatus::Unbounded:
      return "unbounded";
    case SolveStatus::MaxIter:
      return "max_iter";
  }
  return "?";
}

namespace detail {

Lowered lower_problem(const ConicProblem& p) {
  Lowered out;
  out.c = p.c;
  out.original_rows = p.num_rows();
  const Eigen::Index n = p.num_vars();
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(p.A.nonZeros()) + static_cast<std::size_t>(2 * n));
  for (Eigen::Index k = 0; k < p.A.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(p.A, k); it; ++it) trips.emplace_back(it.row(), it.col(), it.value());
  }
  std::vector<double> rhs(p.b.data(), p.b.data() + p.b.size());
  out.cones = p.cones;

  Eigen::Index row = p.num_rows();
  if (p.has_bounds()) {
    const double inf = std::numeric_limits<double>::infinity();
    auto lo = [&](Eigen::Index i) { return p.lower.size() ? p.lower[i] : -inf; };
    auto hi = [&](Eigen::Index i) { return p.upper.size() ? p.upper[i] : inf; };
    // Fixed variables: x_i + s = v, s in {0}.
    Eigen::Index fixed = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (lo(i) == hi(i)) {
        trips.emplace_back(row++, i, 1.0);
        rhs.push_back(lo(i));
        ++fixed;
      }
    }
    if (fixed > 0) out.cones.push_back(ConeBlock::zero(fixed));
    Eigen::Index boxed = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (lo(i) == hi(i)) continue;
      if (hi(i) < inf) {
        trips.emplace_back(row++, i, 1.0);
        rhs.push_back(hi(i));
        ++boxed;
      }
      if (lo(i) > -inf) {
        trips.emplace_back(row++, i, -1.0);
        rhs.push_back(-lo(i));
        ++boxed;
      }
    }
    if (boxed > 0) out.cones.push_back(ConeBlock::nonneg(boxed));
  }
  out.A.resize(row, n);
  out.A.setFromTriplets(trips.begin(), trips.end());
  out.A.makeCompressed();
  out.b = Eigen::Map<RVector>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
  return out;
}

double inf_norm(const RVector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

void project_blocks(Eigen::Ref<RVector> v, const std::vector<ConeBlock>& cones, bool dual) {
  Eigen::Index off = 0;
  for (const auto& cone : cones) {
    auto seg = v.segment(off, cone.dim);
    switch (cone.kind) {
      case ConeKind::Zero:
        if (!dual) seg.setZero();
        break;
      case ConeKind::NonNeg:
        seg = seg.cwiseMax(0.0);
        break;
      case ConeKind::SecondOrder: {
        const double t = seg[0];
        const double nu = seg.tail(cone.dim - 1).norm();
        if (nu <= t) break;
        if (nu <= -t) {
          seg.setZero();
          break;
        }
        const double a = 0.5 * (t + nu);
        seg[0] = a;
        seg.tail(cone.dim - 1) *= a / nu;
        break;
      }
      case ConeKind::Exponential: {
        if (!dual) {
          project_exp_inplace(seg.data());
        } else {
          double neg[3] = {-seg[0], -seg[1], -seg[2]};
          project_exp_inplace(neg);
          seg[0] += neg[0];
          seg[1] += neg[1];
          seg[2] += neg[2];
        }
        break;
      }
    }
    off += cone.dim;
  }
}

void equilibrate(SparseMatrix& A, const std::vector<ConeBlock>& cones, int passes, RVector& D, RVector& E) {
  const Eigen::Index m = A.rows(), n = A.cols();
  D = RVector::Ones(m);
  E = RVector::Ones(n);
  constexpr double kMin = 1e-4, kMax = 1e4;
  for (int pass = 0; pass < passes; ++pass) {
    RVector row_max = RVector::Zero(m), col_max = RVector::Zero(n);
    for (Eigen::Index k = 0; k < A.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
        const double a = std::abs(it.value());
        row_max[it.row()] = std::max(row_max[it.row()], a);
        col_max[it.col()] = std::max(col_max[it.col()], a);
      }
    }
    Eigen::Index off = 0;
    for (const auto& cone : cones) {
      if (cone.kind == ConeKind::SecondOrder || cone.kind == ConeKind::Exponential) {
        const double mx = row_max.segment(off, cone.dim).maxCoeff();
        row_max.segment(off, cone.dim).setConstant(mx);
      }
      off += cone.dim;
    }
    RVector dr(m), dc(n);
    for (Eigen::Index i = 0; i < m; ++i) dr[i] = row_max[i] < 1e-12 ? 1.0 : 1.0 / std::sqrt(row_max[i]);
    for (Eigen::Index j = 0; j < n; ++j) dc[j] = col_max[j] < 1e-12 ? 1.0 : 1.0 / std::sqrt(col_max[j]);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double nd = std::clamp(D[i] * dr[i], kMin, kMax);
      dr[i] = nd / D[i];
      D[i] = nd;
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      const double ne = std::clamp(E[j] * dc[j], kMin, kMax);
      dc[j] = ne / E[j];
      E[j] = ne;
    }
    A = dr.asDiagonal() * A * dc.asDiagonal();
  }
}

}  // namespace detail

namespace {

using detail::equilibrate;
using detail::inf_norm;
using detail::Lowered;
using detail::project_blocks;

class HsdeSolver {
 public:
  HsdeSolver(const Lowered& prob, const SolverSettings& settings) : prob_(prob), settings_(settings) {
    n_ = prob.A.cols();
    m_ = prob.A.rows();
    A_ = prob.A;
    if (settings.equilibration_passes > 0) {
      equilibrate(A_, prob.cones, settings.equilibration_passes, D_, E_);
    } else {
      D_ = RVector::Ones(m_);
      E_ = RVector::Ones(n_);
    }
    At_ = A_.transpose();
    b_ = D_.cwiseProduct(prob.b);
    c_ = E_.cwiseProduct(prob.c);
    sigma_b_ = 1.0 / std::max(1.0, b_.norm());
    sigma_c_ = 1.0 / std::max(1.0, c_.norm());
    b_ *= sigma_b_;
    c_ *= sigma_c_;

    zero_rows_ = 0;
    if (!prob.cones.empty() && prob.cones.front().kind == ConeKind::Zero) zero_rows_ = prob.cones.front().dim;
    for (std::size_t i = 1; i < prob.cones.size(); ++i) {
      if (prob.cones[i].kind == ConeKind::Zero) zero_blocks_.emplace_back(offset_of(i), prob.cones[i].dim);
    }
    set_scale(settings.scale);

    const Eigen::Index len = n_ + m_ + 1;
    u_ = RVector::Zero(len);
    v_ = RVector::Zero(len);
    u_[len - 1] = 1.0;
    v_[len - 1] = 1.0;
    w_ = u_ + rinv_.cwiseProduct(v_);
  }

  void warm_start(const WarmStart& w, Eigen::Index original_rows) {
    const Eigen::Index len = n_ + m_ + 1;
    u_.setZero(len);
    v_.setZero(len);
    RVector x = RVector::Zero(n_);
    if (w.x.size() == n_) x = w.x;
    u_.head(n_) = sigma_b_ * x.cwiseQuotient(E_);
    RVector y = RVector::Zero(m_);
    RVector s = prob_.b - prob_.A * x;
    if (w.y.size() == original_rows) y.head(original_rows) = w.y;
    if (w.s.size() == original_rows) s.head(original_rows) = w.s;
    project_blocks(s, prob_.cones, false);
    project_blocks(y, prob_.cones, true);
    u_.segment(n_, m_) = sigma_c_ * y.cwiseQuotient(D_);
    v_.segment(n_, m_) = sigma_b_ * s.cwiseProduct(D_);
    u_[len - 1] = 1.0;
    v_[len - 1] = 0.0;
    w_ = u_ + rinv_.cwiseProduct(v_);
  }

  ConicSolution run() {
    const Eigen::Index len = n_ + m_ + 1;
    const double alpha = settings_.relaxation;
    ConicSolution sol;
    sol.status = SolveStatus::MaxIter;

    const int mem = std::max(0, settings_.anderson_memory);
    RVector g(len), f(len), f_prev(len), g_prev(len), w_fallback;
    std::deque<RVector> dF, dG;
    bool have_prev = false;
    double last_plain_res = std::numeric_limits<double>::infinity();
    bool accelerated = false;
    int last_rescale = 0;
    auto reset_history = [&] {
      dF.clear();
      dG.clear();
      have_prev = false;
      accelerated = false;
    };

    for (int it = 1; it <= settings_.max_iter; ++it) {
      step(w_, g, alpha);
      f = g - w_;
      if (accelerated && f.norm() > kSafeguard * last_plain_res + 1e-300) {
        // Reject the extrapolated point; resume from the last plain image.
        w_ = w_fallback;
        reset_history();
        step(w_, g, alpha);
        f = g - w_;
      }
      last_plain_res = f.norm();

      if (it % settings_.check_interval == 0 || it == settings_.max_iter) {
        if (check(sol, it)) return sol;
        if (settings_.adaptive_scale && it - last_rescale >= kRescaleInterval && rel_dres_ > 0.0 &&
            rel_pres_ > 0.0) {
          const double factor = std::sqrt(rel_pres_ / rel_dres_);
          if (factor > kRescaleTrigger || factor < 1.0 / kRescaleTrigger) {
            const double next = std::clamp(scale_ * factor, 1e-6, 1e6);
            if (next != scale_) {
              set_scale(next);
              w_ = u_ + rinv_.cwiseProduct(v_);
              step(w_, g, alpha);
              f = g - w_;
              reset_history();
              last_rescale = it;
            }
          }
        }
      }

      if (mem == 0) {
        w_ = g;
        continue;
      }
      if (have_prev) {
        dF.push_back(f - f_prev);
        dG.push_back(g - g_prev);
        if (static_cast<int>(dF.size()) > mem) {
          dF.pop_front();
          dG.pop_front();
        }
      }
      f_prev = f;
      g_prev = g;
      have_prev = true;
      accelerated = false;
      if (dF.empty()) {
        w_ = g;
        continue;
      }
      const auto k = static_cast<Eigen::Index>(dF.size());
      Eigen::MatrixXd gram(k, k);
      RVector rhs(k);
      for (Eigen::Index i = 0; i < k; ++i) {
        rhs[i] = dF[i].dot(f);
        for (Eigen::Index j = 0; j <= i; ++j) gram(i, j) = gram(j, i) = dF[i].dot(dF[j]);
      }
      gram.diagonal().array() += 1e-10 * (gram.trace() + 1e-300);
      const RVector gamma = gram.ldlt().solve(rhs);
      if (!gamma.allFinite()) {
        reset_history();
        w_ = g;
        continue;
      }
      w_fallback = g;
      w_ = g;
      for (Eigen::Index i = 0; i < k; ++i) w_.noalias() -= gamma[i] * dG[i];
      accelerated = true;
    }
    return sol;
  }

 private:
  static constexpr int kRescaleInterval = 100;
  static constexpr double kSafeguard = 1.0;
  static constexpr double kRescaleTrigger = 3.0;
  static constexpr double kTauWeight = 10.0;
  static constexpr double kZeroRowFactor = 1e-3;

  Eigen::Index offset_of(std::size_t block) const {
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < block; ++i) off += prob_.cones[i].dim;
    return off;
  }

  /// Diagonal metric R = diag(rho_x, rho_y, tau weight); rho_y is constant on
  /// every cone block so Euclidean projections stay exact.
  void set_scale(double scale) {
    scale_ = scale;
    const Eigen::Index len = n_ + m_ + 1;
    r_ = RVector(len);
    r_.head(n_).setConstant(settings_.rho_x);
    r_.segment(n_, m_).setConstant(1.0 / scale);
    r_.segment(n_, zero_rows_).setConstant(kZeroRowFactor / scale);
    for (const auto& [off, dim] : zero_blocks_) r_.segment(n_ + off, dim).setConstant(kZeroRowFactor / scale);
    r_[len - 1] = kTauWeight;
    rinv_ = r_.cwiseInverse();

    const RVector ry_inv = rinv_.segment(n_, m_);
    SparseMatrix K = At_ * ry_inv.asDiagonal() * A_;
    SparseMatrix I(n_, n_);
    I.setIdentity();
    K += settings_.rho_x * I;
    if (!analyzed_) {
      llt_.analyzePattern(K);
      analyzed_ = true;
    }
    llt_.factorize(K);
    if (llt_.info() != Eigen::Success) throw SolverError("conic solver: factorization failed");

    solve_block(c_, b_, gx_, gy_);
    denom_ = r_[len - 1] + c_.dot(gx_) + b_.dot(gy_);
  }

  /// [rho_x I  A'; -A  R_y] [x; y] = [px; py].
  void solve_block(const RVector& px, const RVector& py, RVector& x, RVector& y) const {
    const auto ry_inv = rinv_.segment(n_, m_);
    x = llt_.solve(px - At_ * ry_inv.cwiseProduct(py));
    y = ry_inv.cwiseProduct(py + A_ * x);
  }

  /// One Douglas-Rachford step in the R-metric; also refreshes u_ and v_.
  void step(const RVector& w, RVector& out, double alpha) {
    const Eigen::Index len = n_ + m_ + 1;
    const RVector p = r_.cwiseProduct(w);
    RVector hx, hy;
    solve_block(p.head(n_), p.segment(n_, m_), hx, hy);
    const double tau = (p[len - 1] + c_.dot(hx) + b_.dot(hy)) / denom_;
    RVector ut(len);
    ut.head(n_) = hx - gx_ * tau;
    ut.segment(n_, m_) = hy - gy_ * tau;
    ut[len - 1] = tau;

    u_ = 2.0 * ut - w;
    auto yseg = u_.segment(n_, m_);
    project_blocks(yseg, prob_.cones, true);
    u_[len - 1] = std::max(u_[len - 1], 0.0);
    v_ = r_.cwiseProduct(w + u_ - 2.0 * ut);
    out = w + alpha * (u_ - ut);
  }

  bool check(ConicSolution& sol, int it) {
    const Eigen::Index len = n_ + m_ + 1;
    const double tau = u_[len - 1];
    const double kappa = v_[len - 1];
    const double tol = settings_.tol;
    sol.iterations = it;

    // Scaled-space residuals drive the adaptive metric.
    {
      const RVector xh = u_.head(n_), yh = u_.segment(n_, m_), sh = v_.segment(n_, m_);
      const RVector ax = A_ * xh, aty = At_ * yh;
      rel_pres_ = inf_norm(ax + sh - b_ * tau) / std::max({inf_norm(ax), inf_norm(sh), tau * inf_norm(b_), 1e-300});
      rel_dres_ = inf_norm(aty + c_ * tau) / std::max({inf_norm(aty), tau * inf_norm(c_), 1e-300});
    }

    // Unscaled directions (positive multiples of the true iterates).
    const RVector xd = E_.cwiseProduct(u_.head(n_)) / sigma_b_;
    const RVector yd = D_.cwiseProduct(u_.segment(n_, m_)) / sigma_c_;
    const RVector sd = v_.segment(n_, m_).cwiseQuotient(D_) / sigma_b_;

    if (tau > 1e-12 * std::max(1.0, kappa)) {
      const RVector x = xd / tau, y = yd / tau;
      RVector s = sd / tau;
      project_blocks(s, prob_.cones, false);
      const RVector Ax = prob_.A * x;
      const RVector Aty = prob_.A.transpose() * y;
      const double pnorm = 1.0 + std::max({inf_norm(Ax), inf_norm(s), inf_norm(prob_.b)});
      const double dnorm = 1.0 + std::max(inf_norm(Aty), inf_norm(prob_.c));
      const double cx = prob_.c.dot(x), by = prob_.b.dot(y);
      const double pres = inf_norm(Ax + s - prob_.b) / pnorm;
      const double dres = inf_norm(Aty + prob_.c) / dnorm;
      const double gap = std::abs(cx + by) / (1.0 + std::max(std::abs(cx), std::abs(by)));
      sol.primal_residual = pres;
      sol.dual_residual = dres;
      sol.duality_gap = gap;
      sol.x = x;
      sol.y = y.head(prob_.original_rows);
      sol.s = s.head(prob_.original_rows);
      sol.objective = cx;
      if (pres <= tol && dres <= tol && gap <= tol) {
        sol.status = SolveStatus::Optimal;
        return true;
      }
    }
    const double by = prob_.b.dot(yd);
    if (by < 0.0) {
      const double cert = inf_norm(prob_.A.transpose() * yd) / -by;
      if (cert <= tol) {
        sol.status = SolveStatus::Infeasible;
        sol.y = (yd / -by).head(prob_.original_rows);
        sol.objective = std::numeric_limits<double>::infinity();
        return true;
      }
    }
    const double cx = prob_.c.dot(xd);
    if (cx < 0.0) {
      const double cert = inf_norm(prob_.A * xd + sd) / -cx;
      if (cert <= tol) {
        sol.status = SolveStatus::Unbounded;
        sol.x = xd / -cx;
        sol.objective = -std::numeric_limits<double>::infinity();
        return true;
      }
    }
    return false;
  }

  const Lowered& prob_;
  SolverSettings settings_;
  Eigen::Index n_ = 0, m_ = 0;
  SparseMatrix A_, At_;
  RVector b_, c_, D_, E_;
  double sigma_b_ = 1.0, sigma_c_ = 1.0;
  Eigen::Index zero_rows_ = 0;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> zero_blocks_;
  double scale_ = 1.0;
  RVector r_, rinv_;
  Eigen::SimplicialLDLT<SparseMatrix> llt_;
  bool analyzed_ = false;
  RVector gx_, gy_;
  double denom_ = 1.0;
  double rel_pres_ = 0.0, rel_dres_ = 0.0;
  RVector u_, v_, w_;
};

}  // namespace

ConicSolution solve_conic(const ConicProblem& problem, const SolverSettings& settings, const WarmStart* warm) {
  problem.validate();
  if (!(settings.tol > 0.0 && settings.tol <= 1e-2)) throw ConfigError("solve_conic: tol must be in (0, 1e-2]");
  if (settings.max_iter < 1) throw ConfigError("solve_conic: max_iter must be >= 1");
  if (!(settings.relaxation > 0.0 && settings.relaxation < 2.0)) {
    throw ConfigError("solve_conic: relaxation must be in (0, 2)");
  }
  if (!(settings.rho_x > 0.0) || !(settings.scale > 0.0)) throw ConfigError("solve_conic: rho_x and scale must be > 0");
  const Lowered lowered = detail::lower_problem(problem);
  if (settings.method == ConicMethod::InteriorPoint) return detail::solve_interior(lowered, settings);
  HsdeSolver solver(lowered, settings);
  if (warm != nullptr) solver.warm_start(*warm, lowered.original_rows);
  return solver.run();
}

}  // namespace metasurf::conic
