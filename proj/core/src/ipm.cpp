// SPDX-License-Identifier: Apache-2.0
//
// Homogeneous primal-dual interior-point method.
//
// Zero-cone rows become equality constraints A x = b with free multipliers;
// the remaining rows read G x + s = h, s in K. NonNeg and SOC blocks use
// Nesterov-Todd scaling with a Mehrotra corrector. Exponential blocks use a
// primal-dual scaling built from the conjugate barrier (closed form via the
// Wright omega function), a third-order corrector, a backtracking test on the
// barrier proximity, and pure centering steps once that proximity grows.
#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "conic_internal.hpp"

namespace metasurf::conic::detail {
namespace {

constexpr double kExpCentral[3] = {-0.827838399065679, 0.805102001584795, 1.290927709856958};
constexpr double kStepFraction = 0.99;
constexpr double kStaticReg = 1e-10;
constexpr int kRefineSteps = 10;
constexpr double kMinStep = 1e-6;
// Exponential-block proximity (as a fraction of the bound) above which the
// next step is pure centering.
constexpr double kCenterFraction = 0.5;
constexpr int kMaxShortSteps = 10;

struct Block {
  ConeKind kind;
  Eigen::Index off;  // offset into s / z
  Eigen::Index dim;
  double degree;
};

bool exp_primal_interior(const double* v) {
  const double x = v[0], y = v[1], z = v[2];
  return y > 0.0 && z > 0.0 && y * std::log(z / y) - x > 0.0;
}

bool exp_dual_interior(const double* v) {
  const double u = v[0], w = v[1], t = v[2];
  return u < 0.0 && t > 0.0 && std::log(-u) + w / u < 1.0 + std::log(t);
}

/// Gradient and Hessian of -log(y log(z/y) - x) - log y - log z, with the
/// inner value psi = y log(z/y) - x supplied by the caller.
void exp_barrier(const double* v, double psi, Eigen::Vector3d& grad, Eigen::Matrix3d& hess) {
  const double y = v[1], z = v[2];
  const double l = std::log(z / y);
  const Eigen::Vector3d dpsi(-1.0, l - 1.0, y / z);
  Eigen::Matrix3d d2psi;
  d2psi << 0.0, 0.0, 0.0, 0.0, -1.0 / y, 1.0 / z, 0.0, 1.0 / z, -y / (z * z);
  grad = -dpsi / psi;
  grad[1] -= 1.0 / y;
  grad[2] -= 1.0 / z;
  hess = dpsi * dpsi.transpose() / (psi * psi) - d2psi / psi;
  hess(1, 1) += 1.0 / (y * y);
  hess(2, 2) += 1.0 / (z * z);
}

void exp_barrier(const double* v, Eigen::Vector3d& grad, Eigen::Matrix3d& hess) {
  exp_barrier(v, v[1] * std::log(v[2] / v[1]) - v[0], grad, hess);
}

/// Root b > 0 of log(1 + b) + b = c for c > 0.
double log1p_plus_root(double c) {
  double b = c < 1.0 ? 0.5 * c : std::max(c - std::log1p(c), 0.5);
  for (int it = 0; it < 50; ++it) {
    const double f = std::log1p(b) + b - c;
    const double step = f / (1.0 / (1.0 + b) + 1.0);
    double next = b - step;
    if (next <= 0.0) next = 0.5 * b;
    if (std::abs(next - b) <= 1e-16 * b) {
      b = next;
      break;
    }
    b = next;
  }
  return b;
}

/// s~ = -grad F*(z) in closed form, together with psi(s~) = -1 / z_0.
bool exp_conjugate_point(const double* zp, Eigen::Vector3d& out, double& psi) {
  const double u = zp[0], v = zp[1], w = zp[2];
  if (!(u < 0.0 && w > 0.0)) return false;
  const double c = -v / u + 1.0 - std::log(-u / w);
  if (!(c > 0.0) || !std::isfinite(c)) return false;
  const double b = log1p_plus_root(c);
  psi = -1.0 / u;
  const double y = 1.0 / (b * -u);
  const double z = (1.0 + 1.0 / b) / w;
  out = Eigen::Vector3d(y * std::log(z / y) - psi, y, z);
  return out.allFinite();
}

/// Third directional derivative grad^3 F*(z)[d, d] of the conjugate barrier,
/// given the conjugate point s~ = -grad F*(z) and psi(s~).
Eigen::Vector3d exp_dual_third(const Eigen::Vector3d& st, double psi, const Eigen::Vector3d& d) {
  Eigen::Vector3d grad;
  Eigen::Matrix3d hess;
  exp_barrier(st.data(), psi, grad, hess);
  const auto llt = hess.ldlt();
  const Eigen::Vector3d a = llt.solve(d);
  const double y = st[1], z = st[2];
  const Eigen::Vector3d dpsi(-1.0, std::log(z / y) - 1.0, y / z);
  Eigen::Matrix3d d2psi;
  d2psi << 0.0, 0.0, 0.0, 0.0, -1.0 / y, 1.0 / z, 0.0, 1.0 / z, -y / (z * z);
  const Eigen::Vector3d d3psi(0.0, a[1] * a[1] / (y * y) - a[2] * a[2] / (z * z),
                              -2.0 * a[1] * a[2] / (z * z) + 2.0 * y * a[2] * a[2] / (z * z * z));
  const double p1 = dpsi.dot(a), p2 = a.dot(d2psi * a);
  Eigen::Vector3d t = -d3psi / psi + 2.0 * p1 * (d2psi * a) / (psi * psi) + (p2 / (psi * psi) - 2.0 * p1 * p1 / (psi * psi * psi)) * dpsi;
  t[1] -= 2.0 * a[1] * a[1] / (y * y * y);
  t[2] -= 2.0 * a[2] * a[2] / (z * z * z);
  return llt.solve(t);
}

/// F(s) + F*(z) + 3 log(s'z / 3) + 3: zero exactly on the central ray, positive
/// elsewhere, +inf outside the interior.
double exp_proximity(const double* sp, const double* zp) {
  if (!exp_primal_interior(sp) || !exp_dual_interior(zp)) return std::numeric_limits<double>::infinity();
  Eigen::Vector3d st;
  double psi_t = 0.0;
  if (!exp_conjugate_point(zp, st, psi_t)) return std::numeric_limits<double>::infinity();
  const double psi = sp[1] * std::log(sp[2] / sp[1]) - sp[0];
  const double f = -std::log(psi) - std::log(sp[1]) - std::log(sp[2]);
  const double f_conj = -3.0 + std::log(psi_t) + std::log(st[1]) + std::log(st[2]);
  const double sz = sp[0] * zp[0] + sp[1] * zp[1] + sp[2] * zp[2];
  return f + f_conj + 3.0 * std::log(sz / 3.0) + 3.0;
}

/// Primal-dual scaling H of one exponential block with H z = s and
/// H z~ = s~, built as a rank update of mu * grad^2 F*(z).
bool exp_scaling(const double* sp, const double* zp, Eigen::Vector3d& s_tilde, double& psi_tilde, Eigen::Matrix3d& H) {
  const Eigen::Vector3d s(sp[0], sp[1], sp[2]), z(zp[0], zp[1], zp[2]);
  if (!exp_conjugate_point(zp, s_tilde, psi_tilde)) return false;
  Eigen::Vector3d grad, gt;
  Eigen::Matrix3d hess, ht;
  exp_barrier(sp, grad, hess);
  exp_barrier(s_tilde.data(), psi_tilde, gt, ht);
  const double local_mu = s.dot(z) / 3.0;
  const Eigen::Vector3d ds = s - local_mu * s_tilde;
  const Eigen::Vector3d dz = z + local_mu * grad;
  // H0 = mu * ht^{-1} = L L' with L = sqrt(mu) C^{-T}, ht = C C'. The
  // projected term H0 - H0 Z (Z' H0 Z)^{-1} Z' H0 equals L (I - P) L' with P
  // the projector onto span(L' Z); forming it from an orthonormal complement
  // keeps it PSD where the explicit difference cancels catastrophically.
  const Eigen::LLT<Eigen::Matrix3d> llt(ht);
  if (llt.info() != Eigen::Success) return false;
  const Eigen::Matrix3d L =
      std::sqrt(local_mu) * llt.matrixU().solve(Eigen::Matrix3d::Identity());  // C^{-T}
  const double sz = s.dot(z);
  const double dsdz = ds.dot(dz);
  const Eigen::Vector3d a = L.transpose() * z;
  H = s * s.transpose() / sz;
  const Eigen::Vector3d b = L.transpose() * dz;
  const Eigen::Vector3d normal = a.cross(b);
  if (dsdz > 1e-10 * sz && normal.norm() > 1e-12 * a.norm() * b.norm()) {
    const Eigen::Vector3d ln = L * normal.normalized();
    H += ds * ds.transpose() / dsdz + ln * ln.transpose();
  } else {
    // Orthonormal complement of a.
    const Eigen::Vector3d u = a.normalized();
    const Eigen::Vector3d pick = std::abs(u[0]) < 0.6 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    const Eigen::Vector3d v1 = u.cross(pick).normalized();
    const Eigen::Vector3d v2 = u.cross(v1);
    const Eigen::Vector3d l1 = L * v1, l2 = L * v2;
    H += l1 * l1.transpose() + l2 * l2.transpose();
  }
  H = 0.5 * (H + H.transpose());
  return H.allFinite();
}

double soc_residual(const Eigen::Ref<const RVector>& v) { return v[0] * v[0] - v.tail(v.size() - 1).squaredNorm(); }

/// Jordan product for the second-order cone.
RVector soc_prod(const RVector& u, const RVector& v) {
  RVector out(u.size());
  out[0] = u.dot(v);
  out.tail(u.size() - 1) = u[0] * v.tail(v.size() - 1) + v[0] * u.tail(u.size() - 1);
  return out;
}

/// x with lambda o x = d.
RVector soc_div(const RVector& lam, const RVector& d) {
  const Eigen::Index p = lam.size();
  const double l0 = lam[0];
  const auto l1 = lam.tail(p - 1);
  const double x0 = (l0 * d[0] - l1.dot(d.tail(p - 1))) / (l0 * l0 - l1.squaredNorm());
  RVector out(p);
  out[0] = x0;
  out.tail(p - 1) = (d.tail(p - 1) - x0 * l1) / l0;
  return out;
}

/// Largest a in [0, cap] with v + a dv in the closed SOC.
double soc_max_step(const Eigen::Ref<const RVector>& v, const Eigen::Ref<const RVector>& dv, double cap) {
  const Eigen::Index p = v.size();
  const double a = dv[0] * dv[0] - dv.tail(p - 1).squaredNorm();
  const double b = 2.0 * (v[0] * dv[0] - v.tail(p - 1).dot(dv.tail(p - 1)));
  const double c = std::max(soc_residual(v), 0.0);
  double step = cap;
  if (dv[0] < 0.0) step = std::min(step, -v[0] / dv[0]);
  // Smallest positive root of a t^2 + b t + c.
  if (std::abs(a) < 1e-300) {
    if (b < 0.0) step = std::min(step, -c / b);
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      const double q = -0.5 * (b + std::copysign(sq, b));
      const double r1 = q / a;
      const double r2 = q != 0.0 ? c / q : std::numeric_limits<double>::infinity();
      for (double r : {r1, r2}) {
        if (r > 0.0) step = std::min(step, r);
      }
    }
  }
  return std::max(step, 0.0);
}

/// Nesterov-Todd scaling of one SOC block, stored densely.
struct SocScaling {
  Eigen::MatrixXd W, Winv;
  RVector lambda;
};

SocScaling soc_scaling(const RVector& s, const RVector& z) {
  const Eigen::Index p = s.size();
  const double sres = soc_residual(s), zres = soc_residual(z);
  const RVector sb = s / std::sqrt(sres), zb = z / std::sqrt(zres);
  const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
  RVector wb(p);
  wb[0] = (sb[0] + zb[0]) / (2.0 * gamma);
  wb.tail(p - 1) = (sb.tail(p - 1) - zb.tail(p - 1)) / (2.0 * gamma);
  const double eta = std::pow(sres / zres, 0.25);
  const double w0 = wb[0];
  const RVector w1 = wb.tail(p - 1);
  Eigen::MatrixXd core = Eigen::MatrixXd::Identity(p - 1, p - 1) + w1 * w1.transpose() / (1.0 + w0);
  SocScaling out;
  out.W.resize(p, p);
  out.W(0, 0) = w0;
  out.W.block(0, 1, 1, p - 1) = w1.transpose();
  out.W.block(1, 0, p - 1, 1) = w1;
  out.W.block(1, 1, p - 1, p - 1) = core;
  out.Winv = out.W;
  out.Winv.block(0, 1, 1, p - 1) *= -1.0;
  out.Winv.block(1, 0, p - 1, 1) *= -1.0;
  out.W *= eta;
  out.Winv /= eta;
  out.lambda = out.W * z;
  return out;
}

class InteriorPoint {
 public:
  InteriorPoint(const Lowered& prob, const SolverSettings& settings) : prob_(prob), settings_(settings) {
    n_ = prob.A.cols();
    SparseMatrix A = prob.A;
    if (settings.equilibration_passes > 0) {
      equilibrate(A, prob.cones, settings.equilibration_passes, D_, E_);
    } else {
      D_ = RVector::Ones(A.rows());
      E_ = RVector::Ones(n_);
    }
    const RVector b = D_.cwiseProduct(prob.b);
    c_ = E_.cwiseProduct(prob.c);

    // Split rows into equalities and cone rows.
    std::vector<Eigen::Index> row_map(static_cast<std::size_t>(A.rows()), -1);
    Eigen::Index off = 0;
    for (const auto& cone : prob.cones) {
      for (Eigen::Index i = 0; i < cone.dim; ++i) {
        const auto r = static_cast<std::size_t>(off + i);
        if (cone.kind == ConeKind::Zero) {
          row_map[r] = static_cast<Eigen::Index>(eq_rows_.size());
          eq_rows_.push_back(off + i);
        } else {
          row_map[r] = static_cast<Eigen::Index>(cone_rows_.size());
          cone_rows_.push_back(off + i);
        }
      }
      if (cone.kind != ConeKind::Zero && cone.dim > 0) {
        const Eigen::Index start = static_cast<Eigen::Index>(cone_rows_.size()) - cone.dim;
        double degree = 1.0;
        if (cone.kind == ConeKind::NonNeg) degree = static_cast<double>(cone.dim);
        if (cone.kind == ConeKind::Exponential) degree = 3.0;
        blocks_.push_back({cone.kind, start, cone.dim, degree});
        nu_ += degree;
      }
      off += cone.dim;
    }
    me_ = static_cast<Eigen::Index>(eq_rows_.size());
    mc_ = static_cast<Eigen::Index>(cone_rows_.size());
    std::vector<Triplet> te, tg;
    for (Eigen::Index k = 0; k < A.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
        const bool is_eq = is_eq_row(it.row());
        (is_eq ? te : tg).emplace_back(row_map[static_cast<std::size_t>(it.row())], it.col(), it.value());
      }
    }
    Ae_.resize(me_, n_);
    Ae_.setFromTriplets(te.begin(), te.end());
    G_.resize(mc_, n_);
    G_.setFromTriplets(tg.begin(), tg.end());
    Gt_ = G_.transpose();
    Aet_ = Ae_.transpose();
    be_.resize(me_);
    for (Eigen::Index i = 0; i < me_; ++i) be_[i] = b[eq_rows_[static_cast<std::size_t>(i)]];
    h_.resize(mc_);
    for (Eigen::Index i = 0; i < mc_; ++i) h_[i] = b[cone_rows_[static_cast<std::size_t>(i)]];
  }

  ConicSolution run() {
    ConicSolution sol;
    sol.status = SolveStatus::MaxIter;
    RVector x = RVector::Zero(n_), y = RVector::Zero(me_), s(mc_), z(mc_);
    for (const auto& blk : blocks_) init_block(blk, s, z);
    double tau = 1.0, kappa = 1.0;
    build_pattern();

    int short_steps = 0;
    for (int it = 0; it <= settings_.ipm_max_iter; ++it) {
      sol.iterations = it;
      if (check(sol, x, y, s, z, tau, kappa)) return sol;
      if (it == settings_.ipm_max_iter) break;

      const RVector rx = Aet_ * y + Gt_ * z + c_ * tau;
      const RVector ry = -(Ae_ * x) + be_ * tau;
      const RVector rz = -(G_ * x) + h_ * tau - s;
      const double rt = -c_.dot(x) - be_.dot(y) - h_.dot(z) - kappa;
      const double mu = (s.dot(z) + tau * kappa) / (nu_ + 1.0);

      if (!build_scaling(s, z)) break;
      if (!factor()) break;

      RVector u2x, u2y, u2z;
      solve3(-c_, be_, h_, u2x, u2y, u2z);
      const double hu2 = c_.dot(u2x) + be_.dot(u2y) + h_.dot(u2z);

      RVector dx, dy, dz, ds;
      double dtau = 0.0, dkappa = 0.0, alpha = 0.0;
      if (max_exp_proximity(s, z) > kCenterFraction * settings_.ipm_proximity) {
        // Pure centering: residuals stay put while the exponential blocks
        // return toward the central path.
        const RVector zero = RVector::Zero(mc_);
        const RVector q = combined_q(s, z, zero, zero, 1.0, mu);
        direction(s, z, rx, ry, rz, rt, q, 1.0, mu, tau, kappa, 0.0, u2x, u2y, u2z, hu2, dx, dy, dz, ds, dtau,
                  dkappa);
        alpha = kStepFraction * max_step(s, z, tau, kappa, ds, dz, dtau, dkappa, 1.0 / kStepFraction);
        alpha = neighborhood(s, z, tau, kappa, ds, dz, dtau, dkappa, alpha);
      } else {
        RVector q = affine_q(s);
        direction(s, z, rx, ry, rz, rt, q, 0.0, mu, tau, kappa, 0.0, u2x, u2y, u2z, hu2, dx, dy, dz, ds, dtau,
                  dkappa);
        const double a_aff = max_step(s, z, tau, kappa, ds, dz, dtau, dkappa, 1.0);
        const double sigma = std::clamp(std::pow(1.0 - a_aff, 3), 0.0, 1.0);
        q = combined_q(s, z, ds, dz, sigma, mu);
        const double corr = dtau * dkappa;
        direction(s, z, rx, ry, rz, rt, q, sigma, mu, tau, kappa, corr, u2x, u2y, u2z, hu2, dx, dy, dz, ds, dtau,
                  dkappa);
        alpha = kStepFraction * max_step(s, z, tau, kappa, ds, dz, dtau, dkappa, 1.0 / kStepFraction);
        alpha = neighborhood(s, z, tau, kappa, ds, dz, dtau, dkappa, alpha);
      }
      if (!(alpha > 1e-12)) break;
      // Repeated negligible steps mean the iterate hit the precision floor.
      short_steps = alpha < kMinStep ? short_steps + 1 : 0;
      if (short_steps >= kMaxShortSteps) break;

      x += alpha * dx;
      y += alpha * dy;
      z += alpha * dz;
      s += alpha * ds;
      tau += alpha * dtau;
      kappa += alpha * dkappa;
    }
    return sol;
  }

 private:
  bool is_eq_row(Eigen::Index row) const {
    return std::binary_search(eq_rows_.begin(), eq_rows_.end(), row);
  }

  static void init_block(const Block& blk, RVector& s, RVector& z) {
    auto sb = s.segment(blk.off, blk.dim);
    auto zb = z.segment(blk.off, blk.dim);
    switch (blk.kind) {
      case ConeKind::NonNeg:
        sb.setOnes();
        zb.setOnes();
        break;
      case ConeKind::SecondOrder:
        sb.setZero();
        zb.setZero();
        sb[0] = zb[0] = 1.0;
        break;
      case ConeKind::Exponential:
        for (int i = 0; i < 3; ++i) sb[i] = zb[i] = kExpCentral[i];
        break;
      case ConeKind::Zero:
        break;
    }
  }

  /// Scaling V per block (W^2 for symmetric cones, (mu H(s))^{-1} for Exp).
  bool build_scaling(const RVector& s, const RVector& z) {
    soc_.assign(blocks_.size(), {});
    exp_tilde_.assign(blocks_.size(), Eigen::Vector3d::Zero());
    exp_v_.assign(blocks_.size(), Eigen::Matrix3d::Zero());
    exp_psi_.assign(blocks_.size(), 0.0);
    std::size_t pos = 0;
    auto put = [&](double v) { vvals_[pos++] = v; };
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const auto& blk = blocks_[b];
      switch (blk.kind) {
        case ConeKind::NonNeg:
          for (Eigen::Index i = 0; i < blk.dim; ++i) put(s[blk.off + i] / z[blk.off + i]);
          break;
        case ConeKind::SecondOrder: {
          soc_[b] = soc_scaling(s.segment(blk.off, blk.dim), z.segment(blk.off, blk.dim));
          const Eigen::MatrixXd v = soc_[b].W * soc_[b].W;
          if (!v.allFinite()) return false;
          for (Eigen::Index j = 0; j < blk.dim; ++j) {
            for (Eigen::Index i = 0; i < blk.dim; ++i) put(v(i, j));
          }
          break;
        }
        case ConeKind::Exponential: {
          if (!exp_scaling(s.data() + blk.off, z.data() + blk.off, exp_tilde_[b], exp_psi_[b], exp_v_[b])) return false;
          for (int j = 0; j < 3; ++j) {
            for (int i = 0; i < 3; ++i) put(exp_v_[b](i, j));
          }
          break;
        }
        case ConeKind::Zero:
          break;
      }
    }
    return true;
  }

  /// Quasi-definite KKT pattern [reg A' G'; A -reg 0; G 0 -V-reg], built once.
  void build_pattern() {
    const Eigen::Index dim = n_ + me_ + mc_;
    std::vector<Triplet> t;
    for (Eigen::Index i = 0; i < dim; ++i) t.emplace_back(i, i, 0.0);
    for (Eigen::Index k = 0; k < Ae_.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(Ae_, k); it; ++it) {
        t.emplace_back(n_ + it.row(), it.col(), it.value());
        t.emplace_back(it.col(), n_ + it.row(), it.value());
      }
    }
    for (Eigen::Index k = 0; k < G_.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(G_, k); it; ++it) {
        t.emplace_back(n_ + me_ + it.row(), it.col(), it.value());
        t.emplace_back(it.col(), n_ + me_ + it.row(), it.value());
      }
    }
    std::vector<std::pair<Eigen::Index, Eigen::Index>> ventries;
    for (const auto& blk : blocks_) {
      const Eigen::Index d = blk.kind == ConeKind::NonNeg ? 1 : blk.dim;
      if (blk.kind == ConeKind::NonNeg) {
        for (Eigen::Index i = 0; i < blk.dim; ++i) ventries.emplace_back(blk.off + i, blk.off + i);
        continue;
      }
      for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index i = 0; i < d; ++i) ventries.emplace_back(blk.off + i, blk.off + j);
      }
    }
    for (const auto& [i, j] : ventries) {
      if (i != j) t.emplace_back(n_ + me_ + i, n_ + me_ + j, 0.0);
    }
    K_.resize(dim, dim);
    K_.setFromTriplets(t.begin(), t.end());
    K_.makeCompressed();
    base_ = RVector(K_.nonZeros());
    std::copy(K_.valuePtr(), K_.valuePtr() + K_.nonZeros(), base_.data());
    auto slot = [&](Eigen::Index r, Eigen::Index c) {
      const auto* begin = K_.innerIndexPtr() + K_.outerIndexPtr()[c];
      const auto* end = K_.innerIndexPtr() + K_.outerIndexPtr()[c + 1];
      return static_cast<Eigen::Index>(std::lower_bound(begin, end, r) - K_.innerIndexPtr());
    };
    diag_slots_.resize(static_cast<std::size_t>(dim));
    for (Eigen::Index i = 0; i < dim; ++i) diag_slots_[static_cast<std::size_t>(i)] = slot(i, i);
    vslots_.clear();
    for (const auto& [i, j] : ventries) vslots_.push_back(slot(n_ + me_ + i, n_ + me_ + j));
    vvals_.assign(ventries.size(), 0.0);
    reg_ = RVector(dim);
    reg_.head(n_).setConstant(kStaticReg);
    reg_.tail(me_ + mc_).setConstant(-kStaticReg);
    ldlt_.analyzePattern(K_);
  }

  /// Writes -V into K_ (unregularized) and factors K_ + diag(reg).
  bool factor() {
    std::copy(base_.data(), base_.data() + base_.size(), K_.valuePtr());
    for (std::size_t k = 0; k < vslots_.size(); ++k) K_.valuePtr()[vslots_[k]] -= vvals_[k];
    SparseMatrix Kreg = K_;
    for (int attempt = 0; attempt < 6; ++attempt) {
      for (std::size_t i = 0; i < diag_slots_.size(); ++i) {
        Kreg.valuePtr()[diag_slots_[i]] = K_.valuePtr()[diag_slots_[i]] + reg_[static_cast<Eigen::Index>(i)];
      }
      ldlt_.factorize(Kreg);
      if (ldlt_.info() == Eigen::Success && ldlt_.vectorD().allFinite()) return true;
      reg_ *= 100.0;
    }
    return false;
  }

  /// Solves  [0 Ae' G'; Ae 0 0; G 0 -V] (dx, dy, dz) = (r1, r2, r3).
  void solve3(const RVector& r1, const RVector& r2, const RVector& r3, RVector& dx, RVector& dy,
              RVector& dz) const {
    RVector rhs(n_ + me_ + mc_);
    rhs << r1, r2, r3;
    RVector sol = ldlt_.solve(rhs);
    const double tol = 1e-14 * rhs.lpNorm<Eigen::Infinity>();
    RVector res = rhs - K_.selfadjointView<Eigen::Lower>() * sol;
    double norm = res.lpNorm<Eigen::Infinity>();
    for (int k = 0; k < kRefineSteps && norm > tol; ++k) {
      const RVector trial = sol + ldlt_.solve(res);
      RVector tres = rhs - K_.selfadjointView<Eigen::Lower>() * trial;
      const double tnorm = tres.lpNorm<Eigen::Infinity>();
      if (!(tnorm < norm)) break;
      sol = trial;
      res = std::move(tres);
      norm = tnorm;
    }
    dx = sol.head(n_);
    dy = sol.segment(n_, me_);
    dz = sol.tail(mc_);
  }

  /// ds = q - V dz, block by block.
  void apply_v(const RVector& s, const RVector& z, const RVector& dz, const RVector& q, RVector& ds) const {
    ds.resize(mc_);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const auto& blk = blocks_[b];
      const auto dzb = dz.segment(blk.off, blk.dim);
      auto out = ds.segment(blk.off, blk.dim);
      switch (blk.kind) {
        case ConeKind::NonNeg:
          out = q.segment(blk.off, blk.dim) -
                s.segment(blk.off, blk.dim).cwiseQuotient(z.segment(blk.off, blk.dim)).cwiseProduct(dzb);
          break;
        case ConeKind::SecondOrder:
          out = q.segment(blk.off, blk.dim) - soc_[b].W * (soc_[b].W * dzb);
          break;
        case ConeKind::Exponential:
          out = q.segment(blk.off, 3) - exp_v_[b] * dzb;
          break;
        case ConeKind::Zero:
          break;
      }
    }
  }

  RVector affine_q(const RVector& s) const {
    RVector q(mc_);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const auto& blk = blocks_[b];
      q.segment(blk.off, blk.dim) = -s.segment(blk.off, blk.dim);
    }
    return q;
  }

  RVector combined_q(const RVector& s, const RVector& z, const RVector& ds_aff, const RVector& dz_aff,
                     double sigma, double mu) const {
    RVector q(mc_);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const auto& blk = blocks_[b];
      auto out = q.segment(blk.off, blk.dim);
      switch (blk.kind) {
        case ConeKind::NonNeg: {
          const auto sb = s.segment(blk.off, blk.dim), zb = z.segment(blk.off, blk.dim);
          const RVector d = sb.cwiseProduct(zb) + ds_aff.segment(blk.off, blk.dim).cwiseProduct(
                                                      dz_aff.segment(blk.off, blk.dim)) -
                            RVector::Constant(blk.dim, sigma * mu);
          out = -d.cwiseQuotient(zb);
          break;
        }
        case ConeKind::SecondOrder: {
          const auto& sc = soc_[b];
          const RVector a = sc.Winv * ds_aff.segment(blk.off, blk.dim);
          const RVector c = sc.W * dz_aff.segment(blk.off, blk.dim);
          RVector d = soc_prod(sc.lambda, sc.lambda) + soc_prod(a, c);
          d[0] -= sigma * mu;
          out = -(sc.W * soc_div(sc.lambda, d));
          break;
        }
        case ConeKind::Exponential:
        {
          Eigen::Vector3d grad;
          Eigen::Matrix3d hess;
          exp_barrier(exp_tilde_[b].data(), exp_psi_[b], grad, hess);
          const Eigen::Vector3d u = hess * ds_aff.segment(blk.off, 3);
          const Eigen::Vector3d v = dz_aff.segment(blk.off, 3);
          const Eigen::Vector3d eta = 0.125 * (exp_dual_third(exp_tilde_[b], exp_psi_[b], u + v) -
                                               exp_dual_third(exp_tilde_[b], exp_psi_[b], u - v));
          out = -s.segment(blk.off, 3) + sigma * mu * exp_tilde_[b] + eta;
        }
          break;
        case ConeKind::Zero:
          break;
      }
    }
    return q;
  }

  void direction(const RVector& s, const RVector& z, const RVector& rx, const RVector& ry, const RVector& rz,
                 double rt, const RVector& q, double sigma, double mu, double tau, double kappa, double corr, const RVector& u2x, const RVector& u2y,
                 const RVector& u2z, double hu2, RVector& dx, RVector& dy, RVector& dz, RVector& ds, double& dtau,
                 double& dkappa) const {
    const double f = 1.0 - sigma;
    RVector u1x, u1y, u1z;
    solve3(-f * rx, f * ry, f * rz - q, u1x, u1y, u1z);
    const double hu1 = c_.dot(u1x) + be_.dot(u1y) + h_.dot(u1z);
    const double target = sigma * mu - tau * kappa - corr;
    dtau = (-f * rt + hu1 + target / tau) / (kappa / tau - hu2);
    dx = u1x + dtau * u2x;
    dy = u1y + dtau * u2y;
    dz = u1z + dtau * u2z;
    apply_v(s, z, dz, q, ds);
    dkappa = (target - kappa * dtau) / tau;
  }

  double max_step(const RVector& s, const RVector& z, double tau, double kappa, const RVector& ds, const RVector& dz,
                  double dtau, double dkappa, double cap) const {
    double a = cap;
    if (dtau < 0.0) a = std::min(a, -tau / dtau);
    if (dkappa < 0.0) a = std::min(a, -kappa / dkappa);
    for (const auto& blk : blocks_) {
      switch (blk.kind) {
        case ConeKind::NonNeg:
          for (Eigen::Index i = blk.off; i < blk.off + blk.dim; ++i) {
            if (ds[i] < 0.0) a = std::min(a, -s[i] / ds[i]);
            if (dz[i] < 0.0) a = std::min(a, -z[i] / dz[i]);
          }
          break;
        case ConeKind::SecondOrder:
          a = std::min(a, soc_max_step(s.segment(blk.off, blk.dim), ds.segment(blk.off, blk.dim), a));
          a = std::min(a, soc_max_step(z.segment(blk.off, blk.dim), dz.segment(blk.off, blk.dim), a));
          break;
        default:
          break;
      }
    }
    for (const auto& blk : blocks_) {
      if (blk.kind != ConeKind::Exponential) continue;
      auto inside = [&](double t) {
        double ps[3], pz[3];
        for (int i = 0; i < 3; ++i) {
          ps[i] = s[blk.off + i] + t * ds[blk.off + i];
          pz[i] = z[blk.off + i] + t * dz[blk.off + i];
        }
        return exp_primal_interior(ps) && exp_dual_interior(pz);
      };
      if (inside(a)) continue;
      double lo = 0.0, hi = a;
      for (int k = 0; k < 60; ++k) {
        const double mid = 0.5 * (lo + hi);
        (inside(mid) ? lo : hi) = mid;
      }
      a = lo;
    }
    return std::max(a, 0.0);
  }

  double max_exp_proximity(const RVector& s, const RVector& z) const {
    double worst = 0.0;
    for (const auto& blk : blocks_) {
      if (blk.kind == ConeKind::Exponential) {
        worst = std::max(worst, exp_proximity(s.data() + blk.off, z.data() + blk.off));
      }
    }
    return worst;
  }

  /// Backtracks until every exponential block keeps s'z >= beta * 3 * mu and a
  /// bounded barrier proximity.
  double neighborhood(const RVector& s, const RVector& z, double tau, double kappa, const RVector& ds,
                      const RVector& dz, double dtau, double dkappa, double alpha) const {
    bool has_exp = false;
    for (const auto& blk : blocks_) has_exp = has_exp || blk.kind == ConeKind::Exponential;
    if (!has_exp) return alpha;
    for (int k = 0; k < 60; ++k) {
      const RVector sn = s + alpha * ds, zn = z + alpha * dz;
      const double mun = (sn.dot(zn) + (tau + alpha * dtau) * (kappa + alpha * dkappa)) / (nu_ + 1.0);
      bool ok = true;
      for (const auto& blk : blocks_) {
        if (blk.kind != ConeKind::Exponential) continue;
        if (sn.segment(blk.off, 3).dot(zn.segment(blk.off, 3)) < 0.1 * 3.0 * mun) {
          ok = false;
          break;
        }
        if (!(exp_proximity(sn.data() + blk.off, zn.data() + blk.off) <= settings_.ipm_proximity)) {
          ok = false;
          break;
        }
      }
      if (ok) return alpha;
      alpha *= 0.8;
    }
    return 0.0;
  }

  bool check(ConicSolution& sol, const RVector& xs, const RVector& ys, const RVector& ss, const RVector& zs,
             double tau, double kappa) {
    const Eigen::Index m = prob_.A.rows();
    const double tol = settings_.tol;
    // Unscaled directions in the original row order.
    const RVector xd = E_.cwiseProduct(xs);
    RVector yd = RVector::Zero(m), sd = RVector::Zero(m);
    for (Eigen::Index i = 0; i < me_; ++i) {
      const Eigen::Index r = eq_rows_[static_cast<std::size_t>(i)];
      yd[r] = D_[r] * ys[i];
    }
    for (Eigen::Index i = 0; i < mc_; ++i) {
      const Eigen::Index r = cone_rows_[static_cast<std::size_t>(i)];
      yd[r] = D_[r] * zs[i];
      sd[r] = ss[i] / D_[r];
    }
    if (tau > 1e-14 * std::max(1.0, kappa)) {
      const RVector x = xd / tau, y = yd / tau, s = sd / tau;
      const RVector Ax = prob_.A * x;
      const RVector Aty = prob_.A.transpose() * y;
      const double pnorm = 1.0 + std::max({inf_norm(Ax), inf_norm(s), inf_norm(prob_.b)});
      const double dnorm = 1.0 + std::max(inf_norm(Aty), inf_norm(prob_.c));
      const double cx = prob_.c.dot(x), by = prob_.b.dot(y);
      sol.primal_residual = inf_norm(Ax + s - prob_.b) / pnorm;
      sol.dual_residual = inf_norm(Aty + prob_.c) / dnorm;
      sol.duality_gap = std::abs(cx + by) / (1.0 + std::max(std::abs(cx), std::abs(by)));
      sol.x = x;
      sol.y = y.head(prob_.original_rows);
      sol.s = s.head(prob_.original_rows);
      sol.objective = cx;
      if (sol.primal_residual <= tol && sol.dual_residual <= tol && sol.duality_gap <= tol) {
        sol.status = SolveStatus::Optimal;
        return true;
      }
    }
    const double by = prob_.b.dot(yd);
    if (by < 0.0 && inf_norm(prob_.A.transpose() * yd) / -by <= tol) {
      sol.status = SolveStatus::Infeasible;
      sol.y = (yd / -by).head(prob_.original_rows);
      sol.objective = std::numeric_limits<double>::infinity();
      return true;
    }
    const double cx = prob_.c.dot(xd);
    if (cx < 0.0 && inf_norm(prob_.A * xd + sd) / -cx <= tol) {
      sol.status = SolveStatus::Unbounded;
      sol.x = xd / -cx;
      sol.objective = -std::numeric_limits<double>::infinity();
      return true;
    }
    return false;
  }

  const Lowered& prob_;
  SolverSettings settings_;
  Eigen::Index n_ = 0, me_ = 0, mc_ = 0;
  RVector D_, E_, c_, be_, h_;
  SparseMatrix Ae_, Aet_, G_, Gt_;
  std::vector<Eigen::Index> eq_rows_, cone_rows_;
  std::vector<Block> blocks_;
  double nu_ = 0.0;

  SparseMatrix K_;
  RVector base_, reg_;
  std::vector<Eigen::Index> diag_slots_, vslots_;
  std::vector<double> vvals_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
  std::vector<SocScaling> soc_;
  std::vector<Eigen::Vector3d> exp_tilde_;
  std::vector<Eigen::Matrix3d> exp_v_;
  std::vector<double> exp_psi_;
};

}  // namespace

ConicSolution solve_interior(const Lowered& problem, const SolverSettings& settings) {
  InteriorPoint ipm(problem, settings);
  return ipm.run();
}

}  // namespace metasurf::conic::detail
