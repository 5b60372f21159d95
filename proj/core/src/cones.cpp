// SPDX-License-Identifier: Apache-2.0
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "metasurf/conic.hpp"

namespace metasurf::conic {
namespace {

constexpr std::array<double, 21> kExpScanGrid = {-40, -20, -10, -6, -4, -3, -2, -1.5, -1, -0.5, 0,
                                                 0.5, 1,   1.5, 2,  3,  4,  6,  10,   20, 40};

/// Boundary generator of the exponential cone, rescaled by exp(-rho) for
/// rho > 0 so that no component overflows. Only its direction matters.
std::array<double, 3> generator(double rho) {
  if (rho <= 0.0) return {rho, 1.0, std::exp(rho)};
  const double e = std::exp(-rho);
  return {rho * e, e, 1.0};
}

double dot3(const double* a, const std::array<double, 3>& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

/// Cosine-like score v . a / ||a|| of the generator at rho.
double score(const double* v, double rho) {
  const auto a = generator(rho);
  return dot3(v, a) / std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
}

/// Stationarity function of the distance along the boundary, multiplied by a
/// positive factor so it stays finite for every rho.
double stationarity(const double* v, double rho) {
  const double r = v[0], s = v[1], t = v[2];
  const double quad = rho * rho - rho + 1.0;
  if (rho >= 0.0) {
    const double e = std::exp(-rho);
    return ((rho - 1.0) * r + s) - (r - rho * s) * e * e - quad * t * e;
  }
  const double e = std::exp(rho);
  return ((rho - 1.0) * r + s) * e * e - (r - rho * s) - quad * t * e;
}

double root_illinois(const double* v, double lo, double hi, double f_lo, double f_hi) {
  int side = 0;
  double mid = lo;
  for (int it = 0; it < 200; ++it) {
    mid = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
    if (!(mid > lo && mid < hi)) mid = 0.5 * (lo + hi);
    const double f_mid = stationarity(v, mid);
    if (f_mid == 0.0) return mid;
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f_mid;
      if (side == -1) f_hi *= 0.5;
      side = -1;
    } else {
      hi = mid;
      f_hi = f_mid;
      if (side == 1) f_lo *= 0.5;
      side = 1;
    }
    if (hi - lo <= 1e-15 * (1.0 + std::abs(mid))) break;
  }
  return 0.5 * (lo + hi);
}

double golden_max(const double* v, double lo, double hi) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
  double fa = score(v, a), fb = score(v, b);
  for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + std::abs(lo)); ++it) {
    if (fa < fb) {
      lo = a;
      a = b;
      fa = fb;
      b = lo + g * (hi - lo);
      fb = score(v, b);
    } else {
      hi = b;
      b = a;
      fb = fa;
      a = hi - g * (hi - lo);
      fa = score(v, a);
    }
  }
  return 0.5 * (lo + hi);
}

bool in_exp(const double* v, double tol) {
  const double r = v[0], s = v[1], t = v[2];
  if (s > 0.0) {
    // s exp(r/s) <= t, evaluated as a relative comparison.
    const double lhs = s * std::exp(r / s);
    return lhs - t <= tol * (1.0 + std::abs(t));
  }
  return s >= -tol && r <= tol && t >= -tol;
}

double dist2(const double* v, const std::array<double, 3>& p) {
  const double a = v[0] - p[0], b = v[1] - p[1], c = v[2] - p[2];
  return a * a + b * b + c * c;
}

}  // namespace

namespace {

// dist(v, K*) = ||P_K(-v)|| by Moreau. The closed-form test
// -u e^{w/u} <= e x is badly conditioned as u -> 0-.
bool in_exp_dual(const double* v, double tol) {
  double neg[3] = {-v[0], -v[1], -v[2]};
  project_exp_inplace(neg);
  return std::sqrt(neg[0] * neg[0] + neg[1] * neg[1] + neg[2] * neg[2]) <= tol;
}

}  // namespace

std::string to_string(ConeKind kind) {
  switch (kind) {
    case ConeKind::Zero:
      return "zero";
    case ConeKind::NonNeg:
      return "nonneg";
    case ConeKind::SecondOrder:
      return "soc";
    case ConeKind::Exponential:
      return "exp";
  }
  return "?";
}

void project_exp_inplace(double* v) {
  const double r0 = v[0], s0 = v[1], t0 = v[2];

  if (s0 > 0.0 && s0 * std::exp(r0 / s0) <= t0) return;
  if (s0 == 0.0 && r0 <= 0.0 && t0 >= 0.0) return;
  // -v in the dual cone: the projection is the origin.
  if (r0 > 0.0 && r0 * std::exp(s0 / r0) <= -std::numbers::e * t0) {
    v[0] = v[1] = v[2] = 0.0;
    return;
  }
  if (r0 == 0.0 && s0 <= 0.0 && t0 <= 0.0) {
    v[0] = v[1] = v[2] = 0.0;
    return;
  }
  const std::array<double, 3> face{std::min(r0, 0.0), 0.0, std::max(t0, 0.0)};
  if (r0 <= 0.0 && s0 <= 0.0) {
    v[0] = face[0];
    v[1] = face[1];
    v[2] = face[2];
    return;
  }

  // Projection onto the smooth part of the boundary: find the generator
  // direction closest in angle to v, then project onto that ray.
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < kExpScanGrid.size(); ++i) {
    const double sc = score(v, kExpScanGrid[i]);
    if (sc > best_score) {
      best_score = sc;
      best = i;
    }
  }
  double lo, hi;
  if (best == 0) {
    // Maximizer lies further left; extend geometrically.
    double left = kExpScanGrid[0], right = kExpScanGrid[1];
    double sc_left = best_score;
    while (left > -1e8) {
      const double next = 2.0 * left;
      const double sc = score(v, next);
      if (sc < sc_left) break;
      right = left;
      left = next;
      sc_left = sc;
    }
    lo = 2.0 * left;
    hi = right;
  } else if (best + 1 == kExpScanGrid.size()) {
    lo = kExpScanGrid[best - 1];
    hi = 2.0 * kExpScanGrid[best];
  } else {
    lo = kExpScanGrid[best - 1];
    hi = kExpScanGrid[best + 1];
  }

  double rho;
  const double f_lo = stationarity(v, lo);
  const double f_hi = stationarity(v, hi);
  if (f_lo < 0.0 && f_hi > 0.0) {
    rho = root_illinois(v, lo, hi, f_lo, f_hi);
    const double g = golden_max(v, lo, hi);
    if (score(v, g) > score(v, rho) + 1e-15 * (1.0 + std::abs(score(v, rho)))) rho = g;
  } else {
    rho = golden_max(v, lo, hi);
  }

  std::array<double, 3> smooth{0.0, 0.0, 0.0};
  {
    const auto a = generator(rho);
    const double proj = dot3(v, a);
    if (proj > 0.0) {
      const double scale = proj / (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
      smooth = {scale * a[0], scale * a[1], scale * a[2]};
      // Snap onto the boundary exactly; the ray direction is exact up to rounding.
      if (smooth[1] > 0.0) smooth[2] = std::max(smooth[2], smooth[1] * std::exp(smooth[0] / smooth[1]));
    }
  }

  const std::array<double, 3> origin{0.0, 0.0, 0.0};
  const std::array<double, 3>* pick = &origin;
  double d_best = dist2(v, origin);
  for (const std::array<double, 3>* cand : std::array<const std::array<double, 3>*, 2>{&face, &smooth}) {
    const double d = dist2(v, *cand);
    if (d < d_best) {
      d_best = d;
      pick = cand;
    }
  }
  v[0] = (*pick)[0];
  v[1] = (*pick)[1];
  v[2] = (*pick)[2];
}

RVector project_cone(const RVector& v, const ConeBlock& cone) {
  if (v.size() != cone.dim) throw DimensionError("project_cone: vector length differs from cone dimension");
  RVector out = v;
  switch (cone.kind) {
    case ConeKind::Zero:
      out.setZero();
      break;
    case ConeKind::NonNeg:
      out = out.cwiseMax(0.0);
      break;
    case ConeKind::SecondOrder: {
      const double t = v[0];
      const double nu = v.tail(v.size() - 1).norm();
      if (nu <= t) break;
      if (nu <= -t) {
        out.setZero();
        break;
      }
      const double a = 0.5 * (t + nu);
      out[0] = a;
      out.tail(v.size() - 1) *= a / nu;
      break;
    }
    case ConeKind::Exponential:
      project_exp_inplace(out.data());
      break;
  }
  return out;
}

RVector project_dual_cone(const RVector& v, const ConeBlock& cone) {
  switch (cone.kind) {
    case ConeKind::Zero:
      if (v.size() != cone.dim) throw DimensionError("project_dual_cone: vector length differs from cone dimension");
      return v;
    case ConeKind::NonNeg:
    case ConeKind::SecondOrder:
      return project_cone(v, cone);
    case ConeKind::Exponential: {
      // Moreau: P_{K*}(v) = v + P_K(-v).
      RVector neg = -v;
      project_exp_inplace(neg.data());
      return v + neg;
    }
  }
  return v;
}

bool in_cone(const RVector& v, const ConeBlock& cone, double tol) {
  switch (cone.kind) {
    case ConeKind::Zero:
      return v.cwiseAbs().maxCoeff() <= tol;
    case ConeKind::NonNeg:
      return v.minCoeff() >= -tol;
    case ConeKind::SecondOrder:
      return v.tail(v.size() - 1).norm() - v[0] <= tol;
    case ConeKind::Exponential:
      return in_exp(v.data(), tol);
  }
  return false;
}

bool in_dual_cone(const RVector& v, const ConeBlock& cone, double tol) {
  switch (cone.kind) {
    case ConeKind::Zero:
      return true;
    case ConeKind::NonNeg:
    case ConeKind::SecondOrder:
      return in_cone(v, cone, tol);
    case ConeKind::Exponential:
      return in_exp_dual(v.data(), tol);
  }
  return false;
}

}  // namespace metasurf::conic
