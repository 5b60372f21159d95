// SPDX-License-Identifier: Apache-2.0
// Test-only random channel sets and small reference computations.
#pragma once

#include <random>
#include <vector>

#include <metasurf/channel.hpp>

namespace metasurf::testing {

inline CVector random_cvector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  CVector v(n);
  for (auto& e : v) e = Complex(normal(rng), normal(rng));
  return v;
}

inline CMatrix random_cmatrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  CMatrix a(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = Complex(normal(rng), normal(rng));
  }
  return a;
}

/// Link-budget parameters with P / (B N0) = snr_scale and B = bandwidth.
inline SceneMeta unit_meta(std::size_t K, std::size_t L, std::size_t N, std::size_t M, double snr_scale = 1.0,
                           double bandwidth = 1.0) {
  SceneMeta meta;
  meta.num_ues = K;
  meta.num_surfaces = L;
  meta.bs_antennas = N;
  meta.surface_elements = M;
  meta.bandwidth_hz = bandwidth;
  meta.tx_power_watt = 1.0;
  meta.noise_psd_watt_per_hz = 1.0 / (snr_scale * bandwidth);
  return meta;
}

/// Gaussian channels; direct links scaled by `direct_scale` so surfaces matter.
inline ChannelSet random_channels(std::mt19937_64& rng, std::size_t K, std::size_t L, std::size_t N, std::size_t M,
                                  double snr_scale = 1.0, double direct_scale = 0.3) {
  const auto n = static_cast<Eigen::Index>(N);
  const auto m = static_cast<Eigen::Index>(M);
  std::vector<CVector> h;
  for (std::size_t k = 0; k < K; ++k) h.push_back(random_cvector(rng, n, direct_scale));
  std::vector<CMatrix> G;
  for (std::size_t l = 0; l < L; ++l) G.push_back(random_cmatrix(rng, m, n, 1.0 / std::sqrt(2.0 * M)));
  std::vector<std::vector<CVector>> g(L);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t k = 0; k < K; ++k) g[l].push_back(random_cvector(rng, m, 1.0 / std::sqrt(2.0)));
  }
  return ChannelSet::assemble(unit_meta(K, L, N, M, snr_scale), std::move(h), std::move(G), std::move(g));
}

/// Random Hermitian PSD matrix of rank <= rank.
inline CMatrix random_psd(std::mt19937_64& rng, Eigen::Index n, Eigen::Index rank) {
  const CMatrix f = random_cmatrix(rng, rank, n);
  return f.adjoint() * f;
}

}  // namespace metasurf::testing
