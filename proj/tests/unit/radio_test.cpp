// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include <metasurf/radio.hpp>

#include "oracles/random_scenes.hpp"

namespace metasurf {
namespace {

constexpr Complex kJ(0.0, 1.0);

CVector vec(std::initializer_list<Complex> v) {
  CVector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (const auto& c : v) out[i++] = c;
  return out;
}

/// Single-surface channel set with direct links h and one N x M cascade per UE,
/// built as G = H^T, g = 1.
ChannelSet one_surface(const std::vector<CVector>& h, const CMatrix& H, double snr_scale = 1.0) {
  const std::size_t K = h.size();
  const auto N = static_cast<std::size_t>(H.rows()), M = static_cast<std::size_t>(H.cols());
  std::vector<std::vector<CVector>> g(1, std::vector<CVector>(K, CVector::Ones(H.cols())));
  return ChannelSet::assemble(testing::unit_meta(K, 1, N, M, snr_scale), h, {H.transpose()}, g);
}

SurfacePlan random_plan(std::mt19937_64& rng, std::size_t K, std::size_t L, std::size_t M,
                        const std::vector<std::uint8_t>& alpha) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  auto unit = [&] {
    CVector v(static_cast<Eigen::Index>(M));
    for (auto& e : v) e = std::polar(1.0, phase(rng));
    return v;
  };
  SurfacePlan plan;
  plan.alpha = alpha;
  plan.ris_phases.resize(L);
  plan.sms_phases.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    if (alpha[l]) {
      for (std::size_t k = 0; k < K; ++k) plan.ris_phases[l].push_back(unit());
    } else {
      plan.sms_phases[l] = unit();
    }
  }
  return plan;
}

TEST(ResultingPhaseVector, RisAndSms) {
  SurfacePlan plan;
  plan.alpha = {1, 0};
  plan.ris_phases = {{vec({kJ, -1.0}), vec({1.0, 1.0})}, {}};
  plan.sms_phases = {CVector(), vec({1.0, 1.0})};
  EXPECT_EQ(resulting_phase_vector(plan, 0, 0), vec({kJ, -1.0}));
  EXPECT_EQ(resulting_phase_vector(plan, 1, 0), vec({1.0, 1.0}));
  EXPECT_EQ(&resulting_phase_vector(plan, 1, 0), &resulting_phase_vector(plan, 1, 1));
  EXPECT_NO_THROW(plan.validate(2, 2, 1));
  EXPECT_THROW(plan.validate(2, 2, 0), ConfigError);
  plan.sms_phases[1][0] = 0.5;
  EXPECT_THROW(plan.validate(2, 2, 1), ConfigError);
}

TEST(EffectiveChannel, Examples) {
  std::mt19937_64 rng(3);
  const auto h = testing::random_cvector(rng, 2);
  const auto bare = ChannelSet::assemble(testing::unit_meta(1, 0, 2, 1), {h}, {}, {});
  EXPECT_EQ(effective_channel(bare, SurfacePlan::all_sms(0, 1), 0), h);

  CMatrix H(1, 1);
  H << 2.0;
  const auto ch = one_surface({CVector::Zero(1)}, H);
  SurfacePlan plan;
  plan.alpha = {1};
  plan.ris_phases = {{vec({kJ})}};
  plan.sms_phases = {CVector()};
  const CVector v = effective_channel(ch, plan, 0);
  EXPECT_EQ(v[0], Complex(0.0, 2.0));
}

TEST(EffectiveChannel, MatchesEntrywiseSum) {
  std::mt19937_64 rng(4);
  const auto ch = testing::random_channels(rng, 2, 3, 3, 2);
  const auto plan = random_plan(rng, 2, 3, 2, {1, 0, 1});
  for (std::size_t k = 0; k < 2; ++k) {
    const CVector v = effective_channel(ch, plan, k);
    for (Eigen::Index n = 0; n < 3; ++n) {
      Complex want = ch.direct(k)[n];
      for (std::size_t l = 0; l < 3; ++l) {
        const CVector& psi = plan.alpha[l] ? plan.ris_phases[l][k] : plan.sms_phases[l];
        for (Eigen::Index m = 0; m < 2; ++m) {
          want += ch.bs_to_surface(l)(m, n) * ch.surface_to_ue(l, k)[m] * psi[m];
        }
      }
      EXPECT_NEAR(std::abs(v[n] - want), 0.0, 1e-12 * (1.0 + std::abs(want)));
    }
  }
}

TEST(MrtPrecoder, Examples) {
  EXPECT_EQ(mrt_precoder(vec({1.0})), vec({1.0}));
  const CVector w = mrt_precoder(vec({3.0 * kJ, 4.0}));
  EXPECT_NEAR(std::abs(w[0] - (-3.0 * kJ / 5.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(w[1] - 0.8), 0.0, 1e-15);
  EXPECT_NEAR(w.norm(), 1.0, 1e-15);
  try {
    mrt_precoder(CVector::Zero(3), 4);
    FAIL();
  } catch (const UnreachableUe& e) {
    EXPECT_EQ(e.ue(), 4u);
  }
}

TEST(MrtPrecoder, GainEqualsNormAndIsOptimal) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    const CVector v = testing::random_cvector(rng, 4);
    const CVector w = mrt_precoder(v);
    const Complex gain = v.transpose() * w;
    EXPECT_NEAR(gain.real(), v.norm(), 1e-12);
    EXPECT_NEAR(gain.imag(), 0.0, 1e-12);
    CVector other = testing::random_cvector(rng, 4);
    other /= other.norm();
    EXPECT_LE(std::abs(Complex(v.transpose() * other)), std::abs(gain) + 1e-12);
  }
}

TEST(Snr, Examples) {
  EXPECT_EQ(snr(vec({1.0}), 1.0, 1.0, 1.0), 1.0);
  EXPECT_EQ(snr(vec({3.0, 4.0}), 2.0, 10.0, 1.0), 5.0);
  EXPECT_EQ(snr(CVector::Zero(2), 1.0, 1.0, 1.0), 0.0);
  std::mt19937_64 rng(6);
  const CVector v = testing::random_cvector(rng, 4);
  const double base = snr(v, 1.0, 1.0, 1.0);
  EXPECT_NEAR(snr(std::polar(1.0, 0.7) * v, 1.0, 1.0, 1.0), base, 1e-12 * base);
}

TEST(Rate, ExamplesAndMonotonicity) {
  EXPECT_DOUBLE_EQ(rate(0.5, 2.0, 3.0), 2.0);
  EXPECT_EQ(rate(0.5, 2.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(rate(1.0, 1e9, 1.0), 1e9);
  double prev = 0.0;
  for (double g = 0.0; g < 100.0; g += 0.37) {
    const double r = rate(0.3, 5.0, g);
    EXPECT_GE(r, prev);
    prev = r;
  }
  EXPECT_LE(rate(0.2, 1.0, 3.0), rate(0.3, 1.0, 3.0));
  EXPECT_LE(rate(0.2, 1.0, 3.0), rate(0.2, 2.0, 3.0));
}

TEST(EvaluatePlan, Examples) {
  const auto one = ChannelSet::assemble(testing::unit_meta(1, 0, 1, 1), {vec({1.0})}, {}, {});
  const auto e = evaluate_plan(one, SurfacePlan::all_sms(0, 1), {{1.0}});
  EXPECT_DOUBLE_EQ(e.min_rate_bps, 1.0);

  std::mt19937_64 rng(7);
  const CVector h = testing::random_cvector(rng, 2);
  const auto twin = ChannelSet::assemble(testing::unit_meta(2, 0, 2, 1), {h, h}, {}, {});
  const auto t = evaluate_plan(twin, SurfacePlan::all_sms(0, 1), {{0.5, 0.5}});
  EXPECT_EQ(t.rate_bps[0], t.rate_bps[1]);
  EXPECT_EQ(t.min_rate_bps, t.rate_bps[0]);

  const auto zero = ChannelSet::assemble(testing::unit_meta(1, 0, 1, 1), {CVector::Zero(1)}, {}, {});
  EXPECT_THROW(evaluate_plan(zero, SurfacePlan::all_sms(0, 1), {{1.0}}), UnreachableUe);
}

TEST(EvaluatePlan, SmsSurfacesAreUeIndependent) {
  std::mt19937_64 rng(8);
  const auto ch = testing::random_channels(rng, 3, 2, 2, 2);
  const auto plan = random_plan(rng, 3, 2, 2, {0, 0});
  // Relabel UEs: the surface contributions follow the UE's own channels only.
  for (std::size_t k = 0; k < 3; ++k) {
    CVector want = ch.direct(k);
    for (std::size_t l = 0; l < 2; ++l) want += ch.cascade(l, k) * plan.sms_phases[l];
    EXPECT_NEAR((effective_channel(ch, plan, k) - want).norm(), 0.0, 1e-12);
  }
}

TEST(EvaluatePlan, PhaseGridMatchesCoherentBound) {
  // N=1, M=2: brute force over 16 steps/element lands within grid resolution
  // of (|h| + sum_m |H_m|)^2 and every grid point is scored consistently.
  std::mt19937_64 rng(9);
  const CVector h = testing::random_cvector(rng, 1);
  const CMatrix H = testing::random_cmatrix(rng, 1, 2);
  const auto ch = one_surface({h}, H);
  const double bound = std::pow(std::abs(h[0]) + std::abs(H(0, 0)) + std::abs(H(0, 1)), 2);
  const int steps = 16;
  double best = 0.0;
  for (int a = 0; a < steps; ++a) {
    for (int b = 0; b < steps; ++b) {
      SurfacePlan plan;
      plan.alpha = {1};
      plan.ris_phases = {{vec({std::polar(1.0, 2.0 * std::numbers::pi * a / steps),
                                std::polar(1.0, 2.0 * std::numbers::pi * b / steps)})}};
      plan.sms_phases = {CVector()};
      const auto e = evaluate_plan(ch, plan, {{1.0}});
      const Complex v = h[0] + H(0, 0) * plan.ris_phases[0][0][0] + H(0, 1) * plan.ris_phases[0][0][1];
      EXPECT_NEAR(e.snr[0], std::norm(v), 1e-12 * bound);
      EXPECT_NEAR(e.min_rate_bps, std::log2(1.0 + std::norm(v)), 1e-12);
      best = std::max(best, e.snr[0]);
    }
  }
  EXPECT_LE(best, bound * (1.0 + 1e-12));
  // Each element is off by at most pi/16, so the amplitude loss is bounded by cos(pi/16).
  EXPECT_GE(best, bound * std::pow(std::cos(std::numbers::pi / steps), 2));
}

TEST(Allocation, Validation) {
  const Allocation ok{{0.5, 0.5}}, floor{{0.05, 0.5}}, over{{0.6, 0.5}};
  EXPECT_NO_THROW(ok.validate(0.1));
  EXPECT_THROW(floor.validate(0.1), ConfigError);
  EXPECT_THROW(over.validate(0.1), ConfigError);
}

}  // namespace
}  // namespace metasurf
