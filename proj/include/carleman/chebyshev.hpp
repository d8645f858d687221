// Copyright 2026 The Carleman-KPP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Chebyshev expansion of the scalar exponential
//   e^{xt} = I_0(t) + 2 Σ_{k>=1} I_k(t) T_k(x),   x ∈ [-1, 1],
// with I_k the modified Bessel functions of the first kind.

#pragma once

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "carleman/error.hpp"
#include "carleman/linalg.hpp"

namespace carleman {

namespace detail {

/// log of the s-th series term of I_k(t): (k+2s) log(t/2) - log s! - log (k+s)!.
inline double bessel_log_term(std::size_t k, std::size_t s, double log_half_t) {
  const double kk = static_cast<double>(k), ss = static_cast<double>(s);
  return (kk + 2.0 * ss) * log_half_t - std::lgamma(ss + 1.0) - std::lgamma(kk + ss + 1.0);
}

/// Σ_s exp(log_term_s - shift), summed until the term is negligible.
inline double bessel_series(std::size_t k, double t, double shift, std::size_t max_terms) {
  const double lh = std::log(0.5 * t);
  double sum = 0.0;
  for (std::size_t s = 0; s < max_terms; ++s) {
    const double term = std::exp(bessel_log_term(k, s, lh) - shift);
    sum += term;
    // terms rise until s ~ t/2, then fall monotonically
    if (static_cast<double>(s) > 0.5 * t && term < 1e-18 * sum) break;
  }
  return sum;
}

}  // namespace detail

/// I_k(t) by its power series; t > 700 overflows double and is rejected.
inline double bessel_I(std::size_t k, double t) {
  if (!(t >= 0.0)) throw PreconditionError("bessel_I: argument must be >= 0");
  if (t > 700.0) throw PreconditionError("bessel_I: argument " + std::to_string(t) + " > 700 overflows");
  if (t == 0.0) return k == 0 ? 1.0 : 0.0;
  return detail::bessel_series(k, t, 0.0, 500);
}

/// e^{-t} I_k(t), free of overflow for large t.
inline double bessel_I_scaled(std::size_t k, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw PreconditionError("bessel_I_scaled: argument must be finite and >= 0");
  if (t == 0.0) return k == 0 ? 1.0 : 0.0;
  return detail::bessel_series(k, t, t, 500 + static_cast<std::size_t>(2.0 * t));
}

/// C_0 = I_0(t), C_k = 2 I_k(t), so Σ C_k T_k(x) ≈ e^{xt}.
inline Vector chebyshev_coefficients(double t, std::size_t r) {
  if (r < 1) throw PreconditionError("chebyshev_coefficients: r must be >= 1");
  Vector c(r + 1);
  for (std::size_t k = 0; k <= r; ++k) c[k] = (k == 0 ? 1.0 : 2.0) * bessel_I(k, t);
  return c;
}

/// e^{-t} C_k: the series then approximates e^{(x-1)t}.
inline Vector chebyshev_coefficients_scaled(double t, std::size_t r) {
  if (r < 1) throw PreconditionError("chebyshev_coefficients: r must be >= 1");
  Vector c(r + 1);
  for (std::size_t k = 0; k <= r; ++k) c[k] = (k == 0 ? 1.0 : 2.0) * bessel_I_scaled(k, t);
  return c;
}

/// Σ c_k T_k(x) by Clenshaw's recurrence.
inline double clenshaw(std::span<const double> c, double x) {
  if (c.empty()) return 0.0;
  double b1 = 0.0, b2 = 0.0;
  for (std::size_t k = c.size(); k-- > 1;) {
    const double b0 = c[k] + 2.0 * x * b1 - b2;
    b2 = b1;
    b1 = b0;
  }
  return c[0] + x * b1 - b2;
}

/// Max over a uniform grid on [-1, 1] of |Σ C_k T_k(x) - e^{xt}|, computed
/// in the e^{-t} scaled frame and reported unscaled (may be +inf for huge t).
inline double chebyshev_max_error(double t, std::size_t r, std::size_t grid = 101) {
  const Vector c = chebyshev_coefficients_scaled(t, r);
  double worst = 0.0;
  for (std::size_t i = 0; i < grid; ++i) {
    const double x = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(grid - 1);
    worst = std::max(worst, std::abs(clenshaw(c, x) - std::exp((x - 1.0) * t)));
  }
  return worst * std::exp(t);
}

struct TruncationOrder {
  std::size_t r = 0;
  std::size_t formula_r = 0;
  int doublings = 0;
  double achieved_error = 0.0;  // unscaled max error on the validation grid
  double allowed_error = 0.0;
};

/// r = ceil(e^{5/4} t / 2 + ln(1/ε)), then checked on a 101-point grid and
/// doubled (at most 4 times) until the error is within max(ε, round-off).
/// The round-off floor 16 (r+1) u e^t only matters once e^t ε^{-1} ~ 1/u.
inline TruncationOrder truncation_order(double t, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw PreconditionError("truncation_order: eps must lie in (0, 1)");
  if (!(t > 0.0) || !std::isfinite(t)) throw PreconditionError("truncation_order: t must be > 0");
  TruncationOrder out;
  const double raw = std::exp(1.25) * t / 2.0 + std::log(1.0 / eps);
  out.formula_r = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(raw)));
  out.r = out.formula_r;
  for (;;) {
    const double floor = 16.0 * static_cast<double>(out.r + 1) * DBL_EPSILON;
    // compare in the scaled frame to avoid overflow
    const Vector c = chebyshev_coefficients_scaled(t, out.r);
    double worst = 0.0;
    for (std::size_t i = 0; i < 101; ++i) {
      const double x = -1.0 + 2.0 * static_cast<double>(i) / 100.0;
      worst = std::max(worst, std::abs(clenshaw(c, x) - std::exp((x - 1.0) * t)));
    }
    const double allowed_scaled = std::max(eps * std::exp(-t), floor);
    out.achieved_error = worst * std::exp(t);
    out.allowed_error = allowed_scaled * std::exp(t);
    if (worst <= allowed_scaled) return out;
    if (out.doublings == 4)
      throw NumericalError("truncation_order: validation failed after 4 doublings (r = " +
                           std::to_string(out.r) + ", error " + std::to_string(out.achieved_error) + ")");
    out.r *= 2;
    ++out.doublings;
  }
}

struct ChebyshevScale {
  double alpha = 0.0;
  double beta = 0.0;
};

/// α = (λ_max + λ_min)/2, β = (λ_max - λ_min)/2 so (λ - α)/β ∈ [-1, 1].
inline ChebyshevScale chebyshev_scale(std::span<const double> lambda) {
  if (lambda.empty()) throw PreconditionError("chebyshev_scale: empty spectrum");
  const auto [lo, hi] = std::minmax_element(lambda.begin(), lambda.end());
  return {0.5 * (*hi + *lo), 0.5 * (*hi - *lo)};
}

/// Truncated-Chebyshev e^{λ t} for every λ in a fixed interval.
class ChebyshevPropagator {
 public:
  std::size_t r = 0;
  double t_phys = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  Vector coeffs;  // scaled: e^{-βt} C_k(βt)

  ChebyshevPropagator() = default;

  /// Fixed order r.
  ChebyshevPropagator(ChebyshevScale s, double t, std::size_t order)
      : r(order), t_phys(t), alpha(s.alpha), beta(s.beta) {
    if (!(t >= 0.0)) throw PreconditionError("ChebyshevPropagator: t must be >= 0");
    if (order < 1) throw PreconditionError("ChebyshevPropagator: r must be >= 1");
    coeffs = chebyshev_coefficients_scaled(beta * t, r);
  }

  /// Order from truncation_order(βt, ε).
  static ChebyshevPropagator with_tolerance(ChebyshevScale s, double t, double eps) {
    const double bt = s.beta * t;
    const std::size_t order = bt > 0.0 ? truncation_order(bt, eps).r : 1;
    return ChebyshevPropagator(s, t, order);
  }

  /// ≈ e^{λ t}.
  double operator()(double lambda) const {
    if (beta == 0.0 || t_phys == 0.0) return std::exp(lambda * t_phys);
    const double raw = (lambda - alpha) / beta;
    if (std::abs(raw) > 1.0 + 1e-9)
      throw PreconditionError("ChebyshevPropagator: eigenvalue " + std::to_string(lambda) +
                              " outside the scaled interval");
    const double x = std::clamp(raw, -1.0, 1.0);
    return std::exp((alpha + beta) * t_phys) * clenshaw(coeffs, x);
  }
};

}  // namespace carleman
