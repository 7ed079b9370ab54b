#pragma once

// Airy function Ai for real arguments, accurate to ~1e-13 relative (relative
// to the oscillation envelope for z < 0).
//
//   |z| <= 8   Taylor expansion about the nearest node of a table with
//              spacing 1/8. Node values of Ai and Ai' are generated once by
//              integrating Ai'' = z Ai in long double with high-order Taylor
//              steps: outward from the exact origin values for z < 0, and
//              backward from the asymptotic values at z = 12 for z > 0
//              (backward integration suppresses the Bi contamination).
//   z > 8      exponentially decaying asymptotic series; underflows to 0
//              smoothly past z ~ 104.
//   z < -8     oscillatory asymptotic series (A&S 10.4.60).
//   z < kAiryMostNegativeArgument  rejected: the phase 2/3 |z|^{3/2} can no
//              longer be represented to 1e-10 in double precision.

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "atomlaser/errors.hpp"

namespace atomlaser {

inline constexpr double kAiryMostNegativeArgument = -5000.0;

namespace detail {

// u_k of the Airy asymptotic expansions: u_0 = 1,
// u_k = (6k-5)(6k-3)(6k-1) / ((2k-1) 216 k) u_{k-1}.
inline constexpr int kAiryTerms = 128;

template <typename Real>
const std::array<Real, kAiryTerms>& airy_u_table() {
  static const std::array<Real, kAiryTerms> table = [] {
    std::array<Real, kAiryTerms> u{};
    u[0] = 1;
    for (int j = 1; j < kAiryTerms; ++j) {
      u[j] = u[j - 1] * Real(6 * j - 5) * Real(6 * j - 3) * Real(6 * j - 1) / (Real(2 * j - 1) * Real(216) * Real(j));
    }
    return u;
  }();
  return table;
}

template <typename Real>
Real airy_u(int k) {
  return airy_u_table<Real>()[k];
}

// Sums sum_k (-1)^k c_k zeta^{-k} with optimal truncation.
template <typename Real, typename Coef>
Real asymptotic_sum(Real zeta, Coef&& coef, int first = 0, int stride = 1) {
  Real sum = 0;
  Real previous = std::numeric_limits<Real>::infinity();
  Real power = std::pow(zeta, -Real(first));
  const Real step = std::pow(zeta, -Real(stride));
  for (int n = 0, k = first; k < kAiryTerms; ++n, k += stride) {
    const Real term = coef(k) * power;
    const Real magnitude = std::fabs(term);
    if (magnitude > previous) break;
    sum += (n % 2 == 0) ? term : -term;
    if (magnitude < std::numeric_limits<Real>::epsilon() * std::fabs(sum)) break;
    previous = magnitude;
    power *= step;
  }
  return sum;
}

// Ai and Ai' for large positive z.
template <typename Real>
void airy_positive_asymptotic(Real z, Real& ai, Real& aip) {
  const Real zeta = Real(2) / 3 * z * std::sqrt(z);
  const Real root_pi = std::sqrt(std::numbers::pi_v<Real>);
  const Real quarter = std::pow(z, Real(0.25));
  const Real decay = std::exp(-zeta);
  const Real s_u = asymptotic_sum<Real>(zeta, [](int k) { return airy_u<Real>(k); });
  const Real s_v = asymptotic_sum<Real>(zeta, [](int k) {
    return k == 0 ? Real(1) : -Real(6 * k + 1) / Real(6 * k - 1) * airy_u<Real>(k);
  });
  ai = decay / (2 * root_pi * quarter) * s_u;
  aip = -quarter * decay / (2 * root_pi) * s_v;
}

// One Taylor step of y'' = z y from z0 to z0 + h.
inline void airy_taylor_step(long double z0, long double h, long double& y, long double& yp) {
  long double a_prev = 0;  // a_{n-1}
  long double a_n = y;     // a_n
  long double a_n1 = yp;   // a_{n+1}
  long double hp = 1;
  long double sum = a_n;
  long double dsum = a_n1;
  for (int n = 0; n < 80; ++n) {
    const long double a_n2 = (z0 * a_n + a_prev) / ((n + 2.0L) * (n + 1.0L));
    hp *= h;
    const long double term = a_n1 * hp;
    sum += term;
    dsum += (n + 2.0L) * a_n2 * hp;
    a_prev = a_n;
    a_n = a_n1;
    a_n1 = a_n2;
    if (n > 6 && std::fabs(term) < 1e-22L * std::fabs(sum) && std::fabs(a_n2 * hp * h) < 1e-22L * std::fabs(sum) &&
        std::fabs(a_n * hp / h) < 1e-22L * std::fabs(sum)) {
      break;
    }
  }
  y = sum;
  yp = dsum;
}

struct AiryTable {
  static constexpr double spacing = 0.125;
  static constexpr double z_lo = -8.0;
  static constexpr double z_hi = 8.0;
  static constexpr int count = 129;
  std::array<double, count> ai{};
  std::array<double, count> aip{};

  AiryTable() {
    constexpr int origin = 64;
    constexpr int substeps = 8;
    const long double h = spacing / substeps;

    long double y = 0.355028053887817239260063186004L;
    long double yp = -0.258819403792806798405183560189L;
    ai[origin] = static_cast<double>(y);
    aip[origin] = static_cast<double>(yp);
    long double z = 0;
    for (int j = origin - 1; j >= 0; --j) {
      for (int s = 0; s < substeps; ++s) {
        airy_taylor_step(z, -h, y, yp);
        z -= h;
      }
      ai[j] = static_cast<double>(y);
      aip[j] = static_cast<double>(yp);
    }

    constexpr long double z_start = 12.0L;
    airy_positive_asymptotic<long double>(z_start, y, yp);
    z = z_start;
    const int steps_to_top = static_cast<int>((z_start - z_hi) / h + 0.5L);
    for (int s = 0; s < steps_to_top; ++s) {
      airy_taylor_step(z, -h, y, yp);
      z -= h;
    }
    for (int j = count - 1; j > origin; --j) {
      ai[j] = static_cast<double>(y);
      aip[j] = static_cast<double>(yp);
      for (int s = 0; s < substeps; ++s) {
        airy_taylor_step(z, -h, y, yp);
        z -= h;
      }
    }
  }
};

inline const AiryTable& airy_table() {
  static const AiryTable table;
  return table;
}

inline double airy_from_table(double z) {
  const auto& t = airy_table();
  const int j = static_cast<int>(std::lround((z - AiryTable::z_lo) / AiryTable::spacing));
  const double zj = AiryTable::z_lo + j * AiryTable::spacing;
  const double d = z - zj;
  double a_prev = 0;
  double a_n = t.ai[j];
  double a_n1 = t.aip[j];
  double sum = a_n + a_n1 * d;
  double dp = d;
  int small_terms = 0;  // every third coefficient vanishes at z_j = 0
  for (int n = 0; n < 40; ++n) {
    const double a_n2 = (zj * a_n + a_prev) / ((n + 2.0) * (n + 1.0));
    dp *= d;
    const double term = a_n2 * dp;
    sum += term;
    a_prev = a_n;
    a_n = a_n1;
    a_n1 = a_n2;
    small_terms = std::fabs(term) <= 1e-18 * std::fabs(sum) ? small_terms + 1 : 0;
    if (small_terms == 3) break;
  }
  return sum;
}

inline double airy_negative_asymptotic(double z) {
  const double x = -z;
  const double zeta = 2.0 / 3.0 * x * std::sqrt(x);
  const double p = asymptotic_sum<double>(zeta, [](int k) { return airy_u<double>(k); }, 0, 2);
  const double q = asymptotic_sum<double>(zeta, [](int k) { return airy_u<double>(k); }, 1, 2);
  const double s = std::sin(zeta);
  const double c = std::cos(zeta);
  // sin(zeta + pi/4) = (s + c)/sqrt2, cos(zeta + pi/4) = (c - s)/sqrt2
  const double amp = 1.0 / (std::sqrt(std::numbers::pi) * std::sqrt(std::sqrt(x)));
  return amp * ((s + c) * p - (c - s) * q) / std::numbers::sqrt2;
}

}  // namespace detail

inline double airy_ai(double z) {
  if (std::isnan(z)) throw Error(ErrorKind::precondition, "airy_ai argument is NaN");
  if (z < kAiryMostNegativeArgument) {
    throw Error(ErrorKind::airy_range,
                "airy_ai(" + std::to_string(z) + "): oscillation phase unresolvable below z = " +
                    std::to_string(kAiryMostNegativeArgument));
  }
  if (z > detail::AiryTable::z_hi) {
    if (z > 120.0) return 0.0;
    double ai = 0;
    double aip = 0;
    detail::airy_positive_asymptotic<double>(z, ai, aip);
    return ai;
  }
  if (z < detail::AiryTable::z_lo) return detail::airy_negative_asymptotic(z);
  return detail::airy_from_table(z);
}

}  // namespace atomlaser
