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

// Fisher-KPP problem u_t = D u_xx + a u + b u^2 on [0,1] with homogeneous
// Dirichlet boundaries, discretized by central differences into
//   du/dt = F1 u + F2 (u ⊗ u).

#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "carleman/linalg.hpp"

namespace carleman {

enum class Profile { kSinSquared, kGaussian, kConstant };

inline std::string_view profile_name(Profile p) {
  switch (p) {
    case Profile::kSinSquared: return "sin2";
    case Profile::kGaussian: return "gaussian";
    case Profile::kConstant: return "constant";
  }
  return "?";
}

inline Profile parse_profile(std::string_view s) {
  if (s == "sin2") return Profile::kSinSquared;
  if (s == "gaussian") return Profile::kGaussian;
  if (s == "constant") return Profile::kConstant;
  throw PreconditionError("unknown initial profile '" + std::string(s) + "'");
}

struct FisherKppProblem {
  double D = 0.2;
  double a = 0.4;
  double b = -1.0;
  double T = 3.0;
  Profile profile = Profile::kSinSquared;
  double amplitude = 0.1;

  double initial(double x) const {
    switch (profile) {
      case Profile::kSinSquared: {
        const double s = std::sin(std::numbers::pi * x);
        return amplitude * s * s;
      }
      case Profile::kGaussian: {
        const double z = (x - 0.5) / 0.1;
        return amplitude * std::exp(-0.5 * z * z);
      }
      case Profile::kConstant: return amplitude;
    }
    return 0.0;
  }

  void validate() const {
    if (!(std::isfinite(D) && std::isfinite(a) && std::isfinite(b) && std::isfinite(T) &&
          std::isfinite(amplitude)))
      throw PreconditionError("FisherKppProblem: non-finite parameter");
    if (D < 0.0) throw PreconditionError("FisherKppProblem: D must be >= 0");
    if (T <= 0.0) throw PreconditionError("FisherKppProblem: T must be > 0");
  }
};

/// du/dt = F1 u + F2 (u ⊗ u), u(0) = u_in.
struct QuadraticOde {
  std::size_t n = 0;
  SparseMatrix F1;  // n x n
  SparseMatrix F2;  // n x n^2
  Vector u_in;
  Vector lambda_F1;  // sorted descending
  double norm_F1 = 0.0;
  double norm_F2 = 0.0;
};

/// (n+1)^2 * tridiag(1, -2, 1).
inline SparseMatrix build_laplacian(std::size_t n) {
  if (n == 0) throw PreconditionError("build_laplacian: n must be >= 1");
  const double s = static_cast<double>((n + 1) * (n + 1));
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i) {
    t.push_back({i, i, -2.0 * s});
    if (i > 0) t.push_back({i, i - 1, s});
    if (i + 1 < n) t.push_back({i, i + 1, s});
  }
  return SparseMatrix(n, n, std::move(t));
}

/// λ_j = -4 D (n+1)^2 sin^2(jπ / 2(n+1)) + a, j = 1..n, descending.
inline Vector f1_spectrum(std::size_t n, double D, double a) {
  Vector lam(n);
  const double np1 = static_cast<double>(n + 1);
  for (std::size_t j = 1; j <= n; ++j) {
    const double s = std::sin(static_cast<double>(j) * std::numbers::pi / (2.0 * np1));
    lam[j - 1] = -4.0 * D * np1 * np1 * s * s + a;
  }
  // sin^2 is increasing on j in 1..n, so for D >= 0 this is already descending
  std::sort(lam.begin(), lam.end(), std::greater<>());
  return lam;
}

/// ||F1|| written as 4D(n+1)^2 + a, the form used by the error and cost bounds.
inline double norm_f1_closed_form(std::size_t n, double D, double a) {
  const double np1 = static_cast<double>(n + 1);
  return 4.0 * D * np1 * np1 + a;
}

/// F_M of shape n x n^M mapping u^{⊗M} to b * (u_j^M)_j.
inline SparseMatrix monomial_term(std::size_t n, std::size_t M, double b, const Limits& limits = {}) {
  if (M < 1) throw PreconditionError("monomial_term: M must be >= 1");
  std::size_t cols = 1, stride = 0;
  for (std::size_t k = 0; k < M; ++k) {
    stride = stride * n + 1;
    if (cols > limits.max_dimension / std::max<std::size_t>(n, 1))
      throw CapacityError("monomial_term: n^M exceeds dimension cap");
    cols *= n;
  }
  std::vector<Triplet> t;
  if (b != 0.0)
    for (std::size_t j = 0; j < n; ++j) t.push_back({j, j * stride, b});
  return SparseMatrix(n, cols, std::move(t), limits);
}

inline QuadraticOde discretize(const FisherKppProblem& p, std::size_t n) {
  p.validate();
  if (n == 0) throw PreconditionError("discretize: n must be >= 1");
  QuadraticOde ode;
  ode.n = n;
  const SparseMatrix L = build_laplacian(n);
  ode.F1 = add(L.scaled(p.D), SparseMatrix::identity(n).scaled(p.a));
  ode.F2 = monomial_term(n, 2, p.b);
  ode.u_in.resize(n);
  for (std::size_t j = 1; j <= n; ++j)
    ode.u_in[j - 1] = p.initial(static_cast<double>(j) / static_cast<double>(n + 1));
  ode.lambda_F1 = f1_spectrum(n, p.D, p.a);
  for (double l : ode.lambda_F1) ode.norm_F1 = std::max(ode.norm_F1, std::abs(l));
  ode.norm_F2 = std::abs(p.b);
  return ode;
}

/// Eigen-decomposition F1 = W diag(lambda) W_inv.
struct Eigensystem {
  Vector lambda;
  DenseMatrix W;
  DenseMatrix W_inv;
};

/// Orthonormal sine basis w_j[k] = sin(jkπ/(n+1)) / ||.||, j ordered to match
/// the descending spectrum.
inline Eigensystem f1_eigenvectors(std::size_t n) {
  Eigensystem es;
  es.W = DenseMatrix(n, n);
  const double np1 = static_cast<double>(n + 1);
  const double norm = std::sqrt(2.0 / np1);
  for (std::size_t j = 1; j <= n; ++j)
    for (std::size_t k = 1; k <= n; ++k)
      es.W(k - 1, j - 1) =
          norm * std::sin(static_cast<double>(j * k) * std::numbers::pi / np1);
  es.W_inv = es.W.transpose();
  return es;
}

/// Residual of F1 W - W diag(lambda), worst column, relative to ||F1||_F.
inline double eigensystem_residual(const SparseMatrix& F1, const Eigensystem& es) {
  double worst = 0.0;
  for (std::size_t j = 0; j < es.lambda.size(); ++j) {
    const Vector w = es.W.column(j);
    Vector r = matvec(F1, w);
    axpy(-es.lambda[j], w, r);
    worst = std::max(worst, l2_norm(r));
  }
  const double scale = std::max(frobenius_norm(F1), 1.0);
  return worst / scale;
}

/// Sine basis paired with the analytic spectrum, verified against F1.
inline Eigensystem f1_eigensystem(const QuadraticOde& ode) {
  Eigensystem es = f1_eigenvectors(ode.n);
  es.lambda = ode.lambda_F1;
  const double res = eigensystem_residual(ode.F1, es);
  if (!(res <= 1e-10))
    throw NumericalError("f1_eigensystem: residual " + std::to_string(res) +
                         " exceeds 1e-10 (spectrum/basis ordering mismatch)");
  return es;
}

/// R = ||u_in|| ||F2|| / |λ_1|, defined only when λ_1 < 0.
inline double compute_R(const QuadraticOde& ode) {
  const double lambda1 = ode.lambda_F1.front();
  if (!(lambda1 < 0.0))
    throw PreconditionError("compute_R: largest eigenvalue of F1 is " + std::to_string(lambda1) +
                            " >= 0; R undefined outside the dissipative regime");
  return l2_norm(ode.u_in) * ode.norm_F2 / std::abs(lambda1);
}

struct Dissipativity {
  bool holds = false;
  double margin = 0.0;  // 4D(n+1)^2 sin^2(π/2(n+1)) - a
};

inline Dissipativity dissipativity_check(std::size_t n, double D, double a) {
  const double np1 = static_cast<double>(n + 1);
  const double s = std::sin(std::numbers::pi / (2.0 * np1));
  Dissipativity d;
  d.margin = 4.0 * D * np1 * np1 * s * s - a;
  d.holds = d.margin > 0.0;
  return d;
}

struct RescaleInfo {
  double gamma = 1.0;
  double R = 0.0;
  bool guarantee_holds = true;  // R < 1, so ||u~(t)|| < 1
  std::string warning;
};

struct RescaledOde {
  QuadraticOde ode;
  RescaleInfo info;
};

/// u~ = u / γ, F~1 = F1, F~2 = γ F2. Without γ, takes γ = ||u_in|| / R.
inline RescaledOde rescale(const QuadraticOde& ode, std::optional<double> gamma = std::nullopt) {
  RescaledOde out{ode, {}};
  if (gamma && !(ode.lambda_F1.front() < 0.0))
    out.info.R = std::numeric_limits<double>::quiet_NaN();
  else
    out.info.R = compute_R(ode);
  double g = 1.0;
  if (gamma) {
    g = *gamma;
    if (!(g > 0.0) || !std::isfinite(g)) throw PreconditionError("rescale: gamma must be > 0");
  } else if (out.info.R > 0.0) {
    g = l2_norm(ode.u_in) / out.info.R;
  }
  if (!(out.info.R < 1.0)) {
    out.info.guarantee_holds = false;
    out.info.warning = "R = " + std::to_string(out.info.R) + " >= 1: ||u~(t)|| < 1 is not guaranteed";
  }
  out.info.gamma = g;
  out.ode.F2 = ode.F2.scaled(g);
  out.ode.norm_F2 = ode.norm_F2 * g;
  out.ode.u_in = scaled(ode.u_in, 1.0 / g);
  return out;
}

}  // namespace carleman
