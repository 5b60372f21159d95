// SPDX-License-Identifier: Apache-2.0
// Test-only reference constructions for the conic solver. Nothing here calls
// the solver or the production projections.
#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <metasurf/conic.hpp>

namespace metasurf::testing {

struct KnownOptimum {
  conic::ConicProblem problem;
  RVector x_star;
  double optimum = 0.0;
};

/// Random problem built around a known primal-dual optimal pair: s* in K and
/// y* in K* are chosen complementary block by block, then b = A x* + s* and
/// c = -A' y*. KKT conditions hold exactly, so c'x* is the optimal value.
inline KnownOptimum make_known_optimum(std::mt19937_64& rng, int num_vars,
                                       const std::vector<conic::ConeBlock>& cones) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.2, 2.0);
  Eigen::Index m = 0;
  for (const auto& c : cones) m += c.dim;
  RVector s(m), y(m);
  Eigen::Index off = 0;
  for (const auto& cone : cones) {
    switch (cone.kind) {
      case conic::ConeKind::Zero:
        for (Eigen::Index i = 0; i < cone.dim; ++i) {
          s[off + i] = 0.0;
          y[off + i] = normal(rng);
        }
        break;
      case conic::ConeKind::NonNeg:
        for (Eigen::Index i = 0; i < cone.dim; ++i) {
          const bool active = (rng() & 1u) != 0;
          s[off + i] = active ? 0.0 : unif(rng);
          y[off + i] = active ? unif(rng) : 0.0;
        }
        break;
      case conic::ConeKind::SecondOrder: {
        RVector u(cone.dim - 1);
        for (auto& e : u) e = normal(rng);
        u.normalize();
        const double a = unif(rng), b = unif(rng);
        s[off] = a;
        s.segment(off + 1, cone.dim - 1) = a * u;
        y[off] = b;
        y.segment(off + 1, cone.dim - 1) = -b * u;
        break;
      }
      case conic::ConeKind::Exponential: {
        std::uniform_real_distribution<double> rho_dist(-2.0, 2.0);
        const double rho = rho_dist(rng);
        const double lam = unif(rng), mu = unif(rng);
        const double e = std::exp(rho);
        s.segment(off, 3) << lam * rho, lam, lam * e;
        y.segment(off, 3) << -mu * e, mu * (rho - 1.0) * e, mu;
        break;
      }
    }
    off += cone.dim;
  }
  Eigen::MatrixXd A(m, num_vars);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (int j = 0; j < num_vars; ++j) A(i, j) = normal(rng);
  }
  RVector x(num_vars);
  for (auto& e : x) e = normal(rng);

  KnownOptimum out;
  out.problem.A = A.sparseView();
  out.problem.b = A * x + s;
  out.problem.c = -A.transpose() * y;
  out.problem.cones = cones;
  out.x_star = x;
  out.optimum = out.problem.c.dot(x);
  return out;
}

/// Distance-minimizing point of the exponential cone found by brute force over
/// the boundary parametrization b (rho, 1, e^rho), b > 0, plus the face
/// {(a, 0, c) : a <= 0, c >= 0} and the origin, refined by a shrinking
/// pattern search in (rho, log b).
inline std::array<double, 3> exp_projection_grid(const std::array<double, 3>& v) {
  auto dist = [&](const std::array<double, 3>& p) {
    return (v[0] - p[0]) * (v[0] - p[0]) + (v[1] - p[1]) * (v[1] - p[1]) + (v[2] - p[2]) * (v[2] - p[2]);
  };
  const double r0 = v[0], s0 = v[1], t0 = v[2];
  if (s0 > 0 && s0 * std::exp(r0 / s0) <= t0) return v;
  if (s0 == 0.0 && r0 <= 0.0 && t0 >= 0.0) return v;

  std::array<double, 3> best{std::min(r0, 0.0), 0.0, std::max(t0, 0.0)};
  double best_d = dist(best);
  if (dist({0, 0, 0}) < best_d) {
    best = {0, 0, 0};
    best_d = dist(best);
  }
  const double scale = 1.0 + std::sqrt(r0 * r0 + s0 * s0 + t0 * t0);
  auto boundary = [](double rho, double logb) {
    const double b = std::exp(logb);
    return std::array<double, 3>{b * rho, b, b * std::exp(rho)};
  };
  double br = 0, bl = 0;
  bool have = false;
  for (int i = 0; i <= 1600; ++i) {
    const double rho = -40.0 + 80.0 * i / 1600.0;
    for (int j = 0; j <= 400; ++j) {
      const double logb = std::log(scale) - 30.0 + 32.0 * j / 400.0;
      const auto p = boundary(rho, logb);
      if (!std::isfinite(p[2])) continue;
      const double d = dist(p);
      if (d < best_d) {
        best_d = d;
        best = p;
        br = rho;
        bl = logb;
        have = true;
      }
    }
  }
  if (have) {
    double step_r = 0.05, step_l = 0.08;
    for (int it = 0; it < 100000 && (step_r > 1e-15 || step_l > 1e-15); ++it) {
      bool improved = false;
      for (auto [dr, dl] : {std::pair{1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0}, {1.0, 1.0}, {-1.0, -1.0},
                            {1.0, -1.0}, {-1.0, 1.0}}) {
        const auto p = boundary(br + dr * step_r, bl + dl * step_l);
        if (!std::isfinite(p[2])) continue;
        const double d = dist(p);
        if (d < best_d) {
          best_d = d;
          best = p;
          br += dr * step_r;
          bl += dl * step_l;
          improved = true;
        }
      }
      if (!improved) {
        step_r *= 0.5;
        step_l *= 0.5;
      }
    }
  }
  return best;
}

}  // namespace metasurf::testing
