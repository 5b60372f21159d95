// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "metasurf/channel.hpp"
#include "metasurf/conic.hpp"

namespace metasurf {

/// Quadratic expansion of ||h_k + H_k z||^2 = z^H A z + 2 Re(z^H b) + c.
struct QuadData {
  CMatrix A;  // H_k^H H_k, (LM) x (LM)
  CVector b;  // H_k^H h_k
  double c = 0.0;  // ||h_k||^2

  /// Exact value of the expansion at z.
  double evaluate(const CVector& z) const;
};

QuadData quad_data(const ChannelSet& channels, std::size_t k);

/// Column indices of every P3 variable. Complex scalars occupy adjacent
/// (re, im) columns.
class VariableLayout {
 public:
  VariableLayout() = default;
  VariableLayout(std::size_t num_ues, std::size_t num_surfaces, std::size_t elements);

  Eigen::Index r_min() const { return 0; }
  Eigen::Index tau(std::size_t k) const { return idx(tau_, k); }
  Eigen::Index d(std::size_t k) const { return idx(d_, k); }
  Eigen::Index e(std::size_t k) const { return idx(e_, k); }
  Eigen::Index slack(std::size_t k) const { return idx(s_, k); }
  Eigen::Index alpha(std::size_t l) const { return idx(alpha_, l); }
  /// Real part; the imaginary part is the next column.
  Eigen::Index z(std::size_t l, std::size_t k, std::size_t m) const { return idx(z_, 2 * ((k * L_ + l) * M_ + m)); }
  Eigen::Index phi(std::size_t l, std::size_t k, std::size_t m) const {
    return idx(phi_, 2 * ((k * L_ + l) * M_ + m));
  }
  Eigen::Index theta(std::size_t l, std::size_t m) const { return idx(theta_, 2 * (l * M_ + m)); }

  Eigen::Index total() const { return total_; }
  std::vector<Eigen::Index> binary_indices() const;

  std::size_t num_ues() const { return K_; }
  std::size_t num_surfaces() const { return L_; }
  std::size_t elements() const { return M_; }

 private:
  static Eigen::Index idx(Eigen::Index base, std::size_t off) { return base + static_cast<Eigen::Index>(off); }
  std::size_t K_ = 0, L_ = 0, M_ = 0;
  Eigen::Index tau_ = 0, d_ = 0, e_ = 0, s_ = 0, alpha_ = 0, z_ = 0, phi_ = 0, theta_ = 0, total_ = 0;
};

/// Row ranges of each constraint family in the built problem.
struct P3Rows {
  Eigen::Index coupling = 0;  // z = phi + theta, 2KLM zero rows
  Eigen::Index sum_tau = 0;
  Eigen::Index budget = -1;   // -1 when L = 0
  Eigen::Index tau_min = 0;   // K rows
  Eigen::Index surrogate = 0; // K rows
  Eigen::Index slack_sign = 0;
  Eigen::Index rmin_sign = 0;
  Eigen::Index rate_soc = 0;  // K blocks of 4
  Eigen::Index phi_soc = 0;   // KLM blocks of 3
  Eigen::Index theta_soc = 0; // LM blocks of 3
  Eigen::Index exp = 0;       // K blocks of 3
};

/// Linearization point z^(i-1), one stacked LM-vector per UE.
struct Iterate {
  std::vector<CVector> z;
};

struct P3Options {
  std::size_t budget = 0;  // L_max
  double tau_min = 0.0;
  double omega = 100.0;
};

struct P3Instance {
  conic::ConicProblem problem;
  VariableLayout layout;
  P3Rows rows;
  /// P / (B N0) used to express the surrogate rows in SNR units.
  double snr_scale = 1.0;
};

/// Builds the convex mixed-integer conic instance around `iterate`.
///
/// Units: rate variables are per Hz (r_min^2 = R_min / B) and the surrogate
/// rows are in SNR units (A_k, b_k, c_k scaled by P / (B N0)), so the slack
/// penalty compares like with like. The objective is the negation of
/// r_min - omega * sum_k s_k.
P3Instance build_p3(const ChannelSet& channels, const P3Options& options, const Iterate& iterate);

/// Same, from precomputed (unscaled) quadratic data. Rejects non-PSD A_k.
P3Instance build_p3(const std::vector<QuadData>& quads, const SceneMeta& meta, const P3Options& options,
                    const Iterate& iterate);

/// z-part of a solution vector as an Iterate.
Iterate extract_iterate(const VariableLayout& layout, const RVector& x);

/// Left-hand side of the surrogate row for UE k in SNR units:
/// -2 Re(zp^H A z) + zp^H A zp - 2 Re(z^H b), with A, b already scaled.
double surrogate_lhs(const QuadData& scaled, const CVector& z_prev, const CVector& z);

}  // namespace metasurf
