// SPDX-License-Identifier: Apache-2.0
#include "metasurf/radio.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <numeric>

namespace metasurf {

std::size_t SurfacePlan::ris_count() const {
  return static_cast<std::size_t>(std::count(alpha.begin(), alpha.end(), std::uint8_t{1}));
}

void SurfacePlan::validate(std::size_t num_ues, std::size_t elements, std::size_t budget,
                           double modulus_tol) const {
  const std::size_t L = alpha.size();
  if (ris_phases.size() != L || sms_phases.size() != L) throw ConfigError("plan: inconsistent surface count");
  auto unit = [&](const CVector& v, const std::string& where) {
    if (static_cast<std::size_t>(v.size()) != elements) throw ConfigError(where + ": expected M entries");
    for (const auto& c : v) {
      if (std::abs(std::abs(c) - 1.0) > modulus_tol) throw ConfigError(where + ": entry not unit modulus");
    }
  };
  for (std::size_t l = 0; l < L; ++l) {
    const std::string where = "plan.surface[" + std::to_string(l) + "]";
    if (alpha[l] > 1) throw ConfigError(where + ".alpha: not binary");
    if (alpha[l] == 1) {
      if (ris_phases[l].size() != num_ues) throw ConfigError(where + ".ris_phases: expected K vectors");
      for (std::size_t k = 0; k < num_ues; ++k) unit(ris_phases[l][k], where + ".ris_phases");
    } else {
      unit(sms_phases[l], where + ".sms_phases");
    }
  }
  if (ris_count() > budget) throw ConfigError("plan.alpha: RIS count exceeds the budget");
}

SurfacePlan SurfacePlan::all_sms(std::size_t num_surfaces, std::size_t elements) {
  SurfacePlan plan;
  plan.alpha.assign(num_surfaces, 0);
  plan.ris_phases.resize(num_surfaces);
  plan.sms_phases.assign(num_surfaces, CVector::Ones(static_cast<Eigen::Index>(elements)));
  return plan;
}

void Allocation::validate(double tau_min) const {
  double sum = 0.0;
  for (std::size_t k = 0; k < tau.size(); ++k) {
    if (!(tau[k] >= tau_min)) throw ConfigError("allocation.tau[" + std::to_string(k) + "]: below tau_min");
    sum += tau[k];
  }
  if (sum > 1.0 + 1e-9) throw ConfigError("allocation.tau: portions sum above 1");
}

const CVector& resulting_phase_vector(const SurfacePlan& plan, std::size_t l, std::size_t k) {
  return plan.alpha.at(l) == 1 ? plan.ris_phases.at(l).at(k) : plan.sms_phases.at(l);
}

CVector effective_channel(const ChannelSet& channels, const SurfacePlan& plan, std::size_t k) {
  if (plan.alpha.size() != channels.num_surfaces()) {
    throw DimensionError("effective_channel: plan has " + std::to_string(plan.alpha.size()) + " surfaces, channels have " +
                         std::to_string(channels.num_surfaces()));
  }
  CVector v = channels.direct(k);
  for (std::size_t l = 0; l < channels.num_surfaces(); ++l) {
    const CVector& psi = resulting_phase_vector(plan, l, k);
    if (psi.size() != channels.cascade(l, k).cols()) throw DimensionError("effective_channel: phase vector length");
    v.noalias() += channels.cascade(l, k) * psi;
  }
  return v;
}

CVector mrt_precoder(const CVector& v, std::size_t ue) {
  const double n = v.norm();
  if (!(n > 0.0)) throw UnreachableUe(ue);
  return v.conjugate() / n;
}

double snr(const CVector& v, double power_watt, double bandwidth_hz, double noise_psd) {
  return v.squaredNorm() * power_watt / (bandwidth_hz * noise_psd);
}

double rate(double tau, double bandwidth_hz, double snr) { return tau * bandwidth_hz * std::log2(1.0 + snr); }

PlanEvaluation evaluate_plan(const ChannelSet& channels, const SurfacePlan& plan, const Allocation& alloc) {
  const auto& meta = channels.meta();
  const std::size_t K = channels.num_ues();
  if (alloc.tau.size() != K) throw DimensionError("evaluate_plan: allocation length differs from K");
  PlanEvaluation out;
  out.snr.resize(K);
  out.rate_bps.resize(K);
  out.min_rate_bps = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    const CVector v = effective_channel(channels, plan, k);
    // Rejects unreachable UEs; the precoder itself is implied by the SNR formula.
    (void)mrt_precoder(v, k);
    out.snr[k] = snr(v, meta.tx_power_watt, meta.bandwidth_hz, meta.noise_psd_watt_per_hz);
    out.rate_bps[k] = rate(alloc.tau[k], meta.bandwidth_hz, out.snr[k]);
    if (out.rate_bps[k] < out.min_rate_bps) {
      out.min_rate_bps = out.rate_bps[k];
      out.worst_ue = k;
    }
  }
  return out;
}

}  // namespace metasurf
