// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "metasurf/channel.hpp"

namespace metasurf {

/// Surface types and phase configurations for every candidate location.
///
/// alpha[l] == 1 marks a RIS: ris_phases[l][k] holds its per-UE configuration
/// and sms_phases[l] is empty. alpha[l] == 0 marks an SMS: sms_phases[l] holds
/// the single configuration shared by all UEs and ris_phases[l] is empty.
struct SurfacePlan {
  std::vector<std::uint8_t> alpha;
  std::vector<std::vector<CVector>> ris_phases;  // [l][k]
  std::vector<CVector> sms_phases;               // [l]

  std::size_t ris_count() const;
  /// Throws ConfigError when binarity, unit modulus, shapes or the budget fail.
  void validate(std::size_t num_ues, std::size_t elements, std::size_t budget, double modulus_tol = 1e-12) const;

  /// All-SMS plan with zero phases, for scenes without optimization.
  static SurfacePlan all_sms(std::size_t num_surfaces, std::size_t elements);
};

/// Time portions per UE, fractions of the unit frame.
struct Allocation {
  std::vector<double> tau;

  void validate(double tau_min) const;
};

struct PlanEvaluation {
  std::vector<double> snr;
  std::vector<double> rate_bps;
  double min_rate_bps = 0.0;
  std::size_t worst_ue = 0;
};

/// psi_{l,k}: phi_{l,k} for a RIS, theta_l for an SMS.
const CVector& resulting_phase_vector(const SurfacePlan& plan, std::size_t l, std::size_t k);

/// v_k = h_k + sum_l H_{l,k} psi_{l,k}.
CVector effective_channel(const ChannelSet& channels, const SurfacePlan& plan, std::size_t k);

/// conj(v)/||v||. Throws UnreachableUe(ue) for a zero channel.
CVector mrt_precoder(const CVector& v, std::size_t ue = 0);

double snr(const CVector& v, double power_watt, double bandwidth_hz, double noise_psd);

double rate(double tau, double bandwidth_hz, double snr);

/// Ground-truth scorer: per-UE SNR and rate from exact channels.
PlanEvaluation evaluate_plan(const ChannelSet& channels, const SurfacePlan& plan, const Allocation& alloc);

}  // namespace metasurf
