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

// A priori error bounds and asymptotic resource formulas.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "carleman/error.hpp"

namespace carleman {

/// ||u_in|| R^N (1 - e^{λ_1 t}); requires R < 1 and λ_1 < 0.
inline double bound_carleman_truncation(double u_in_norm, double R, std::size_t N, double lambda_1, double t) {
  if (!(R < 1.0)) throw PreconditionError("bound_carleman_truncation: R >= 1, bound void");
  if (!(lambda_1 < 0.0)) throw PreconditionError("bound_carleman_truncation: requires lambda_1 < 0");
  if (t < 0.0) throw PreconditionError("bound_carleman_truncation: t must be >= 0");
  return u_in_norm * std::pow(R, static_cast<double>(N)) * (1.0 - std::exp(lambda_1 * t));
}

struct FlaggedBound {
  double value = 0.0;
  bool precondition_ok = true;
};

/// N^2 T h (||F1|| + ||F2||)^2 max ||y||; flagged when h > 1/(N^2 ||F1||).
inline FlaggedBound bound_euler(std::size_t N, double T, double h, double norm_F1, double norm_F2, double max_y) {
  const double NN = static_cast<double>(N * N);
  const double s = norm_F1 + norm_F2;
  return {NN * T * h * s * s * max_y, h <= 1.0 / (NN * norm_F1)};
}

/// (||A|| h)^{K+1} / (K+1)! ||y0||.
inline double bound_taylor(double norm_A, double h, std::size_t K, double y0_norm) {
  const double k1 = static_cast<double>(K + 1);
  return std::exp(k1 * std::log(norm_A * h) - std::lgamma(k1 + 1.0)) * y0_norm;
}

/// Smallest K with bound_taylor <= eps (at most 200).
inline std::size_t taylor_order_for(double norm_A, double h, double y0_norm, double eps) {
  for (std::size_t K = 1; K <= 200; ++K)
    if (bound_taylor(norm_A, h, K, y0_norm) <= eps) return K;
  throw NumericalError("taylor_order_for: no order up to 200 meets the tolerance");
}

/// n^{-1/2} ||u'''|| (1 - e^{ct}) / |c| with c = a + |b| ||u_in||; applicable
/// only for a < 0 and |a| > |b| ||u_in||.
inline FlaggedBound bound_discretization(std::size_t n, double a, double b, double u_in_norm, double t,
                                         double third_deriv_norm) {
  const double c = a + std::abs(b) * u_in_norm;
  FlaggedBound out;
  out.precondition_ok = a < 0.0 && std::abs(a) > std::abs(b) * u_in_norm;
  if (c == 0.0) {
    out.value = third_deriv_norm * t / std::sqrt(static_cast<double>(n));
    return out;
  }
  out.value = third_deriv_norm * (1.0 - std::exp(c * t)) / std::abs(c) / std::sqrt(static_cast<double>(n));
  return out;
}

/// windows κ_V ||y_in|| (e / 2r)^r.
inline double bound_collocation(std::size_t windows, double kappa, double y_in_norm, std::size_t r) {
  const double rr = static_cast<double>(r);
  return static_cast<double>(windows) * kappa * y_in_norm * std::pow(std::exp(1.0) / (2.0 * rr), rr);
}

// ---------------------------------------------------------------------------
// resources

struct ResourceInputs {
  std::size_t n = 8;
  std::size_t N = 3;
  double D = 0.2;
  double a = 0.4;
  double b = -1.0;
  double T = 3.0;
  double eps = 1e-3;
  double kappa = 1.0;      // measured κ_V
  double u_in_norm = 0.0;
  double u_T_norm = 0.0;   // measured ||u(T)||
};

/// One complexity-table row: the T, ε and N dependences multiplied out with
/// unit constants. `leading` drops the polylog factors.
struct ResourceRow {
  std::string method;
  std::string time_scaling;
  std::string error_scaling;
  std::string order_scaling;
  double leading = 0.0;
  double with_polylog = 0.0;
  int time_power = 1;
};

struct ResourceEstimate {
  ResourceInputs inputs;
  double norm_bound = 0.0;      // N (4D(n+1)^2 + a + |b|)
  double sparsity = 0.0;        // 3N
  double query_leading = 0.0;   // κ (3N) [N(...)] T ||u_in|| / ||u(T)||
  double query_polylog = 0.0;
  double query_count = 0.0;
  double gate_factor = 0.0;
  std::vector<ResourceRow> rows;
  std::string label = "asymptotic shape only: unit constants, natural-log polylog factors";
};

/// log(x) floored at 1 so the polylog factor never shrinks an estimate.
inline double unit_polylog(double x) { return std::max(1.0, std::log(x)); }

inline ResourceEstimate estimate_resources(const ResourceInputs& in) {
  if (in.N == 0 || in.n == 0) throw PreconditionError("estimate_resources: n and N must be >= 1");
  if (!(in.T > 0.0) || !(in.eps > 0.0) || !(in.kappa > 0.0) || !(in.u_T_norm > 0.0))
    throw PreconditionError("estimate_resources: T, eps, kappa and ||u(T)|| must be positive");
  ResourceEstimate e;
  e.inputs = in;
  const double NN = static_cast<double>(in.N);
  const double np1 = static_cast<double>(in.n + 1);
  e.norm_bound = NN * (4.0 * in.D * np1 * np1 + in.a + std::abs(in.b));
  e.sparsity = 3.0 * NN;
  const double ratio = in.u_in_norm / in.u_T_norm;
  e.query_leading = in.kappa * e.sparsity * e.norm_bound * in.T * ratio;
  e.query_polylog =
      unit_polylog(in.kappa * e.sparsity * in.u_in_norm * std::sqrt(NN) * e.norm_bound * in.T / (in.eps * in.u_T_norm));
  e.query_count = e.query_leading * e.query_polylog;
  const double nN = std::pow(static_cast<double>(in.n), NN);
  e.gate_factor =
      unit_polylog(in.kappa * e.sparsity * nN * e.norm_bound * in.u_in_norm * std::sqrt(NN) * in.T / in.eps);

  const double lT = unit_polylog(in.T), le = unit_polylog(1.0 / in.eps), lN = unit_polylog(NN);
  {
    ResourceRow r{"euler", "T^2 polylog(T)", "(1/eps) polylog(1/eps)", "N^3 ||u_in||^N polylog(N)"};
    r.time_power = 2;
    r.leading = in.T * in.T * (1.0 / in.eps) * NN * NN * NN * std::pow(in.u_in_norm, NN);
    r.with_polylog = r.leading * lT * le * lN;
    e.rows.push_back(r);
  }
  {
    ResourceRow r{"taylor", "T polylog(T)", "polylog(1/eps)", "N^2 polylog(N)"};
    r.leading = in.T * NN * NN;
    r.with_polylog = r.leading * lT * le * lN;
    e.rows.push_back(r);
  }
  {
    ResourceRow r{"matexp", "T polylog(T)", "polylog(1/eps)", "N n^N polylog(N)"};
    r.leading = in.T * NN * nN;
    r.with_polylog = r.leading * lT * le * lN;
    e.rows.push_back(r);
  }
  {
    ResourceRow r{"spectral", "T polylog(T)", "polylog(1/eps)", "N^2 kappa polylog(N n^N)"};
    r.leading = in.T * NN * NN * in.kappa;
    r.with_polylog = r.leading * lT * le * unit_polylog(NN * nN);
    e.rows.push_back(r);
  }
  return e;
}

}  // namespace carleman
