// SPDX-License-Identifier: Apache-2.0
#include "metasurf/p3.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

namespace metasurf {

using conic::ConeBlock;
using conic::Triplet;

double QuadData::evaluate(const CVector& z) const {
  return (z.dot(A * z)).real() + 2.0 * z.dot(b).real() + c;
}

QuadData quad_data(const ChannelSet& channels, std::size_t k) {
  const CMatrix& Hk = channels.stacked(k);
  const CVector& hk = channels.direct(k);
  QuadData q;
  q.A = Hk.adjoint() * Hk;
  q.b = Hk.adjoint() * hk;
  q.c = hk.squaredNorm();
  return q;
}

VariableLayout::VariableLayout(std::size_t K, std::size_t L, std::size_t M) : K_(K), L_(L), M_(M) {
  const auto k = static_cast<Eigen::Index>(K);
  const auto klm = static_cast<Eigen::Index>(K * L * M);
  const auto lm = static_cast<Eigen::Index>(L * M);
  tau_ = 1;
  d_ = tau_ + k;
  e_ = d_ + k;
  s_ = e_ + k;
  alpha_ = s_ + k;
  z_ = alpha_ + static_cast<Eigen::Index>(L);
  phi_ = z_ + 2 * klm;
  theta_ = phi_ + 2 * klm;
  total_ = theta_ + 2 * lm;
}

std::vector<Eigen::Index> VariableLayout::binary_indices() const {
  std::vector<Eigen::Index> out;
  for (std::size_t l = 0; l < L_; ++l) out.push_back(alpha(l));
  return out;
}

double surrogate_lhs(const QuadData& q, const CVector& zp, const CVector& z) {
  return -2.0 * zp.dot(q.A * z).real() + zp.dot(q.A * zp).real() - 2.0 * z.dot(q.b).real();
}

P3Instance build_p3(const ChannelSet& channels, const P3Options& options, const Iterate& iterate) {
  std::vector<QuadData> quads;
  quads.reserve(channels.num_ues());
  for (std::size_t k = 0; k < channels.num_ues(); ++k) quads.push_back(quad_data(channels, k));
  return build_p3(quads, channels.meta(), options, iterate);
}

P3Instance build_p3(const std::vector<QuadData>& quads, const SceneMeta& meta, const P3Options& options,
                    const Iterate& iterate) {
  const std::size_t K = meta.num_ues, L = meta.num_surfaces, M = meta.surface_elements;
  const std::size_t LM = L * M;
  if (!(options.omega >= 10.0)) throw ConfigError("omega: penalty must be >= 10");
  if (!(options.tau_min > 0.0 && options.tau_min < 1.0)) throw ConfigError("tau_min: must be in (0, 1)");
  if (options.tau_min * static_cast<double>(K) > 1.0 + 1e-12) {
    throw ConfigError("tau_min: K * tau_min exceeds the unit frame");
  }
  if (options.budget > L) throw ConfigError("budget: L_max exceeds the number of surfaces");
  if (quads.size() != K) throw DimensionError("build_p3: expected K quadratic forms");
  if (iterate.z.size() != K) throw DimensionError("build_p3: iterate must hold K vectors");
  for (std::size_t k = 0; k < K; ++k) {
    const auto& q = quads[k];
    if (static_cast<std::size_t>(q.A.rows()) != LM || static_cast<std::size_t>(q.A.cols()) != LM ||
        static_cast<std::size_t>(q.b.size()) != LM) {
      throw DimensionError("build_p3: quadratic data of UE " + std::to_string(k) + " has wrong size");
    }
    if (static_cast<std::size_t>(iterate.z[k].size()) != LM) {
      throw DimensionError("build_p3: iterate of UE " + std::to_string(k) + " has wrong size");
    }
    if (!iterate.z[k].allFinite()) throw DimensionError("build_p3: non-finite iterate");
    if (!(q.c >= 0.0)) throw SolverError("build_p3: negative c_k for UE " + std::to_string(k));
    if (LM > 0) {
      const double scale = q.A.norm();
      const double herm = (q.A - q.A.adjoint()).norm();
      if (herm > 1e-9 * std::max(scale, 1e-300)) {
        throw SolverError("build_p3: A_k of UE " + std::to_string(k) + " is not Hermitian");
      }
      Eigen::SelfAdjointEigenSolver<CMatrix> eig(q.A, Eigen::EigenvaluesOnly);
      if (eig.eigenvalues().minCoeff() < -1e-9 * scale) {
        throw SolverError("build_p3: A_k of UE " + std::to_string(k) + " is not positive semi-definite");
      }
    }
  }

  P3Instance out;
  out.layout = VariableLayout(K, L, M);
  out.snr_scale = meta.snr_scale();
  const VariableLayout& v = out.layout;
  const double gamma = out.snr_scale;
  const Eigen::Index n = v.total();

  std::vector<Triplet> t;
  std::vector<double> rhs;
  Eigen::Index row = 0;
  auto next_row = [&](double b) {
    rhs.push_back(b);
    return row++;
  };
  auto& cones = out.problem.cones;
  auto& rows = out.rows;

  // z_{l,k} = phi_{l,k} + theta_l, real and imaginary parts.
  rows.coupling = row;
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t m = 0; m < M; ++m) {
        for (Eigen::Index part = 0; part < 2; ++part) {
          const Eigen::Index r = next_row(0.0);
          t.emplace_back(r, v.z(l, k, m) + part, 1.0);
          t.emplace_back(r, v.phi(l, k, m) + part, -1.0);
          t.emplace_back(r, v.theta(l, m) + part, -1.0);
        }
      }
    }
  }
  if (row > 0) cones.push_back(ConeBlock::zero(row));

  const Eigen::Index nonneg_begin = row;
  rows.sum_tau = next_row(1.0);
  for (std::size_t k = 0; k < K; ++k) t.emplace_back(rows.sum_tau, v.tau(k), 1.0);
  if (L > 0) {
    rows.budget = next_row(static_cast<double>(options.budget));
    for (std::size_t l = 0; l < L; ++l) t.emplace_back(rows.budget, v.alpha(l), 1.0);
  }
  rows.tau_min = row;
  for (std::size_t k = 0; k < K; ++k) t.emplace_back(next_row(-options.tau_min), v.tau(k), -1.0);

  // Affine surrogate of the SNR constraint around z_prev (SNR units):
  // c + 1 - zp^H A zp + 2 Re(w^H z) + s - d >= 0,  w = A zp + b.
  rows.surrogate = row;
  for (std::size_t k = 0; k < K; ++k) {
    const CVector& zp = iterate.z[k];
    const CMatrix A = gamma * quads[k].A;
    const CVector b = gamma * quads[k].b;
    const CVector w = A * zp + b;
    const double quad = zp.dot(A * zp).real();
    const Eigen::Index r = next_row(gamma * quads[k].c + 1.0 - quad);
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t m = 0; m < M; ++m) {
        const auto j = static_cast<Eigen::Index>(l * M + m);
        const Eigen::Index col = v.z(l, k, m);
        if (w[j].real() != 0.0) t.emplace_back(r, col, -2.0 * w[j].real());
        if (w[j].imag() != 0.0) t.emplace_back(r, col + 1, -2.0 * w[j].imag());
      }
    }
    t.emplace_back(r, v.slack(k), -1.0);
    t.emplace_back(r, v.d(k), 1.0);
  }
  rows.slack_sign = row;
  for (std::size_t k = 0; k < K; ++k) t.emplace_back(next_row(0.0), v.slack(k), -1.0);
  rows.rmin_sign = next_row(0.0);
  t.emplace_back(rows.rmin_sign, v.r_min(), -1.0);
  cones.push_back(ConeBlock::nonneg(row - nonneg_begin));

  // e_k + tau_k >= ||(sqrt(2) r_min, e_k, tau_k)||, i.e. e_k tau_k >= r_min^2.
  rows.rate_soc = row;
  for (std::size_t k = 0; k < K; ++k) {
    const Eigen::Index r0 = next_row(0.0);
    t.emplace_back(r0, v.e(k), -1.0);
    t.emplace_back(r0, v.tau(k), -1.0);
    t.emplace_back(next_row(0.0), v.r_min(), -std::numbers::sqrt2);
    t.emplace_back(next_row(0.0), v.e(k), -1.0);
    t.emplace_back(next_row(0.0), v.tau(k), -1.0);
    cones.push_back(ConeBlock::soc(4));
  }

  // |phi_{l,k,m}| <= alpha_l.
  rows.phi_soc = row;
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t m = 0; m < M; ++m) {
        t.emplace_back(next_row(0.0), v.alpha(l), -1.0);
        t.emplace_back(next_row(0.0), v.phi(l, k, m), -1.0);
        t.emplace_back(next_row(0.0), v.phi(l, k, m) + 1, -1.0);
        cones.push_back(ConeBlock::soc(3));
      }
    }
  }
  // |theta_{l,m}| <= 1 - alpha_l.
  rows.theta_soc = row;
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t m = 0; m < M; ++m) {
      t.emplace_back(next_row(1.0), v.alpha(l), 1.0);
      t.emplace_back(next_row(0.0), v.theta(l, m), -1.0);
      t.emplace_back(next_row(0.0), v.theta(l, m) + 1, -1.0);
      cones.push_back(ConeBlock::soc(3));
    }
  }

  // d_k >= 2^{e_k}  <=>  (e_k ln 2, 1, d_k) in Exp.
  rows.exp = row;
  for (std::size_t k = 0; k < K; ++k) {
    t.emplace_back(next_row(0.0), v.e(k), -std::numbers::ln2);
    next_row(1.0);
    t.emplace_back(next_row(0.0), v.d(k), -1.0);
    cones.push_back(ConeBlock::exp());
  }

  auto& p = out.problem;
  p.A.resize(row, n);
  p.A.setFromTriplets(t.begin(), t.end());
  p.A.makeCompressed();
  p.b = Eigen::Map<RVector>(rhs.data(), row);
  p.c = RVector::Zero(n);
  p.c[v.r_min()] = -1.0;
  for (std::size_t k = 0; k < K; ++k) p.c[v.slack(k)] = options.omega;
  p.ensure_bounds();
  for (std::size_t l = 0; l < L; ++l) {
    p.lower[v.alpha(l)] = 0.0;
    p.upper[v.alpha(l)] = 1.0;
  }
  return out;
}

Iterate extract_iterate(const VariableLayout& v, const RVector& x) {
  if (x.size() != v.total()) throw DimensionError("extract_iterate: solution length differs from layout");
  const std::size_t K = v.num_ues(), L = v.num_surfaces(), M = v.elements();
  Iterate it;
  it.z.assign(K, CVector(static_cast<Eigen::Index>(L * M)));
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t m = 0; m < M; ++m) {
        const Eigen::Index c = v.z(l, k, m);
        it.z[k][static_cast<Eigen::Index>(l * M + m)] = Complex(x[c], x[c + 1]);
      }
    }
  }
  return it;
}

}  // namespace metasurf
