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

// Time propagation: a Dormand-Prince reference for the quadratic ODE and the
// Euler, Taylor, Chebyshev-exponential and Chebyshev-collocation solvers for
// the Carleman system dy/dt = A y.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "carleman/chebyshev.hpp"
#include "carleman/embedding.hpp"
#include "carleman/linalg.hpp"
#include "carleman/pde.hpp"
#include "carleman/spectrum.hpp"

namespace carleman {

enum class TrajectoryKind { kReference, kEuler, kTaylor, kMatexp, kCollocation };

inline std::string_view kind_name(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::kReference: return "reference";
    case TrajectoryKind::kEuler: return "euler";
    case TrajectoryKind::kTaylor: return "taylor";
    case TrajectoryKind::kMatexp: return "matexp";
    case TrajectoryKind::kCollocation: return "collocation";
  }
  return "?";
}

struct Trajectory {
  TrajectoryKind kind = TrajectoryKind::kReference;
  std::size_t block_size = 0;  // n; states hold u (size n) or full y (size d)
  Vector times;
  std::vector<Vector> states;

  std::span<const double> first_block(std::size_t i) const {
    return std::span<const double>(states.at(i)).first(block_size);
  }
  const Vector& final_state() const { return states.back(); }
};

/// Sample times 0, T/m, ..., T.
inline Vector uniform_times(double T, std::size_t m) {
  if (m == 0) throw PreconditionError("uniform_times: need at least one interval");
  Vector t(m + 1);
  for (std::size_t k = 0; k <= m; ++k) t[k] = T * static_cast<double>(k) / static_cast<double>(m);
  t[m] = T;
  return t;
}

// ---------------------------------------------------------------------------
// reference

/// F1 u + F2 (u ⊗ u) without forming u ⊗ u.
inline Vector quadratic_rhs(const QuadraticOde& ode, std::span<const double> u) {
  Vector out = matvec(ode.F1, u);
  const std::size_t n = ode.n;
  for (const auto& t : ode.F2.triplets()) out[t.row] += t.value * u[t.col / n] * u[t.col % n];
  return out;
}

struct ReferenceOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  std::size_t max_steps = 10000000;
};

/// Dormand-Prince 5(4) with embedded error control; steps are shortened to
/// land exactly on each sample time.
template <typename Rhs>
Trajectory integrate_dopri5(Rhs&& f, std::span<const double> y0, std::span<const double> sample_times,
                            const ReferenceOptions& opt = {}) {
  if (sample_times.empty() || sample_times.front() != 0.0)
    throw PreconditionError("solve_reference: sample times must start at 0");
  for (std::size_t i = 1; i < sample_times.size(); ++i)
    if (!(sample_times[i] > sample_times[i - 1]))
      throw PreconditionError("solve_reference: sample times must increase");
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                          b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
  (void)c2, (void)c3, (void)c4, (void)c5;

  const std::size_t n = y0.size();
  Trajectory tr;
  tr.kind = TrajectoryKind::kReference;
  tr.block_size = n;
  tr.times.assign(sample_times.begin(), sample_times.end());
  Vector y(y0.begin(), y0.end());
  tr.states.push_back(y);

  auto stage = [&](std::initializer_list<std::pair<double, const Vector*>> terms, double h) {
    Vector s = y;
    for (const auto& [c, k] : terms)
      for (std::size_t i = 0; i < n; ++i) s[i] += h * c * (*k)[i];
    return s;
  };

  double t = 0.0;
  Vector k1 = f(y);
  const double T = sample_times.back();
  double h = std::min(T, 1e-3 * std::max(T, 1.0));
  {
    const double fn = l2_norm(k1), yn = l2_norm(y);
    if (fn > 0.0) h = std::min(h, 0.01 * std::max(yn, opt.atol) / fn);
  }
  std::size_t steps = 0;
  for (std::size_t target = 1; target < sample_times.size(); ++target) {
    const double t_end = sample_times[target];
    while (t < t_end) {
      if (++steps > opt.max_steps) throw NumericalError("solve_reference: step budget exhausted");
      bool last = false;
      double hs = h;
      if (t + hs >= t_end || t_end - (t + hs) < 1e-12 * std::max(1.0, t_end)) {
        hs = t_end - t;
        last = true;
      }
      const Vector k2 = f(stage({{a21, &k1}}, hs));
      const Vector k3 = f(stage({{a31, &k1}, {a32, &k2}}, hs));
      const Vector k4 = f(stage({{a41, &k1}, {a42, &k2}, {a43, &k3}}, hs));
      const Vector k5 = f(stage({{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}, hs));
      const Vector k6 = f(stage({{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}, hs));
      const Vector y5 = stage({{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}}, hs);
      const Vector k7 = f(y5);
      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double e =
            hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
        err += (e / sc) * (e / sc);
      }
      err = n > 0 ? std::sqrt(err / static_cast<double>(n)) : 0.0;
      if (!std::isfinite(err)) throw NumericalError("solve_reference: non-finite state");
      if (err <= 1.0) {
        t = last ? t_end : t + hs;
        y = y5;
        k1 = k7;
        const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        if (!last || fac < 1.0) h = hs * fac;
      } else {
        h = hs * std::max(0.2, 0.9 * std::pow(err, -0.2));
      }
      if (h < 1e-14 * std::max(1.0, std::abs(t)))
        throw NumericalError("solve_reference: step size underflow at t = " + std::to_string(t));
    }
    tr.states.push_back(y);
  }
  return tr;
}

inline Trajectory solve_reference(const QuadraticOde& ode, std::span<const double> sample_times,
                                  const ReferenceOptions& opt = {}) {
  return integrate_dopri5([&](const Vector& u) { return quadratic_rhs(ode, u); }, ode.u_in, sample_times, opt);
}

inline Trajectory solve_reference(const QuadraticOde& ode, double T, std::size_t samples = 100,
                                  const ReferenceOptions& opt = {}) {
  if (!(T > 0.0)) throw PreconditionError("solve_reference: T must be > 0");
  const Vector times = uniform_times(T, samples);
  return solve_reference(ode, times, opt);
}

// ---------------------------------------------------------------------------
// time stepping

struct StepOptions {
  bool history = true;         // keep every step; otherwise only t=0 and t=T
  double divergence_factor = 1e3;
};

namespace detail {

template <typename Step>
Trajectory march(TrajectoryKind kind, const CarlemanSystem& sys, std::span<const double> y_in, std::size_t m,
                 double T, const StepOptions& opt, Step&& step) {
  if (y_in.size() != sys.d) throw DimensionError("solver: y_in length does not match d");
  if (m == 0) throw PreconditionError("solver: m_steps must be >= 1");
  if (!(T > 0.0)) throw PreconditionError("solver: T must be > 0");
  const double h = T / static_cast<double>(m);
  const double limit = opt.divergence_factor * l2_norm(y_in);
  Trajectory tr;
  tr.kind = kind;
  tr.block_size = sys.n;
  Vector y(y_in.begin(), y_in.end());
  tr.times.push_back(0.0);
  tr.states.push_back(y);
  for (std::size_t k = 1; k <= m; ++k) {
    y = step(y, h);
    const double ny = l2_norm(y);
    if (!(ny <= limit) && ny > 0.0)
      throw NumericalError(std::string(kind_name(kind)) + ": divergence at step " + std::to_string(k) +
                           " (||y|| = " + std::to_string(ny) + "); reduce the step size");
    if (opt.history || k == m) {
      tr.times.push_back(k == m ? T : h * static_cast<double>(k));
      tr.states.push_back(y);
    }
  }
  return tr;
}

}  // namespace detail

/// y^{k+1} = (I + hA) y^k.
inline Trajectory solve_euler(const CarlemanSystem& sys, std::span<const double> y_in, std::size_t m_steps,
                              double T, const StepOptions& opt = {}) {
  return detail::march(TrajectoryKind::kEuler, sys, y_in, m_steps, T, opt, [&](const Vector& y, double h) {
    Vector next = y;
    axpy(h, sys.apply(y), next);
    return next;
  });
}

/// y^{k+1} = Σ_{k<=K} (hA)^k / k! y^k.
inline Trajectory solve_taylor(const CarlemanSystem& sys, std::span<const double> y_in, std::size_t K,
                               std::size_t m_steps, double T, const StepOptions& opt = {}) {
  if (K < 1) throw PreconditionError("solve_taylor: K must be >= 1");
  return detail::march(TrajectoryKind::kTaylor, sys, y_in, m_steps, T, opt, [&](const Vector& y, double h) {
    Vector acc = y, term = y;
    for (std::size_t k = 1; k <= K; ++k) {
      term = sys.apply(term);
      const double s = h / static_cast<double>(k);
      for (double& x : term) x *= s;
      axpy(1.0, term, acc);
    }
    return acc;
  });
}

/// Recommended Euler step bound h <= 1 / (N^2 ||F1||).
inline double euler_step_limit(std::size_t N, double norm_F1) {
  return 1.0 / (static_cast<double>(N * N) * norm_F1);
}

// ---------------------------------------------------------------------------
// Chebyshev matrix exponential

/// y(T) = V [e^{ΛT}]_r V^{-1} y_in.
inline Vector propagate_matexp(const Diagonalization& dg, std::span<const double> y_in,
                               const ChebyshevPropagator& prop) {
  Vector z = dg.apply_V_inv(y_in);
  std::map<double, double> cache;
  for (std::size_t i = 0; i < z.size(); ++i) {
    auto it = cache.find(dg.lambda[i]);
    if (it == cache.end()) it = cache.emplace(dg.lambda[i], prop(dg.lambda[i])).first;
    z[i] *= it->second;
  }
  return dg.apply_V(z);
}

/// Order chosen by truncation_order(βT, ε).
inline Vector propagate_matexp(const Diagonalization& dg, std::span<const double> y_in, double T, double eps) {
  if (!(T >= 0.0)) throw PreconditionError("propagate_matexp: T must be >= 0");
  if (T == 0.0) return dg.apply_V(dg.apply_V_inv(y_in));
  return propagate_matexp(dg, y_in, ChebyshevPropagator::with_tolerance(chebyshev_scale(dg.lambda), T, eps));
}

/// Fixed order r per leg, `legs` equal legs over [0, T]; states at every leg end.
inline Trajectory matexp_trajectory(const Diagonalization& dg, std::span<const double> y_in, double T,
                                    std::size_t legs, std::size_t order) {
  if (legs == 0) throw PreconditionError("matexp_trajectory: legs must be >= 1");
  const double h = T / static_cast<double>(legs);
  const ChebyshevPropagator prop(chebyshev_scale(dg.lambda), h, order);
  Trajectory tr;
  tr.kind = TrajectoryKind::kMatexp;
  tr.block_size = dg.n;
  tr.times = uniform_times(T, legs);
  Vector z = dg.apply_V_inv(y_in);
  Vector factor(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) factor[i] = prop(dg.lambda[i]);
  tr.states.push_back(Vector(y_in.begin(), y_in.end()));
  for (std::size_t k = 1; k <= legs; ++k) {
    for (std::size_t i = 0; i < z.size(); ++i) z[i] *= factor[i];
    tr.states.push_back(dg.apply_V(z));
  }
  return tr;
}

/// Tolerance-driven legs: each sample time computed from t=0 directly.
inline Trajectory matexp_trajectory(const Diagonalization& dg, std::span<const double> y_in,
                                    std::span<const double> times, double eps) {
  Trajectory tr;
  tr.kind = TrajectoryKind::kMatexp;
  tr.block_size = dg.n;
  tr.times.assign(times.begin(), times.end());
  for (double t : times) tr.states.push_back(propagate_matexp(dg, y_in, t, eps));
  return tr;
}

// ---------------------------------------------------------------------------
// Chebyshev collocation

/// T_k'(s) via k sin(kθ)/sin θ, with the limits ±k^2 at the endpoints.
inline double chebyshev_derivative(std::size_t k, double s) {
  const double kk = static_cast<double>(k);
  if (s >= 1.0) return kk * kk;
  if (s <= -1.0) return (k % 2 == 0 ? -1.0 : 1.0) * kk * kk;
  const double th = std::acos(s);
  return kk * std::sin(kk * th) / std::sin(th);
}

inline double chebyshev_T(std::size_t k, double s) {
  if (s >= 1.0) return 1.0;
  if (s <= -1.0) return k % 2 == 0 ? 1.0 : -1.0;
  return std::cos(static_cast<double>(k) * std::acos(s));
}

/// CGL nodes cos(lπ/r), l = 0..r.
inline Vector cgl_nodes(std::size_t r) {
  Vector s(r + 1);
  for (std::size_t l = 0; l <= r; ++l)
    s[l] = std::cos(static_cast<double>(l) * std::numbers::pi / static_cast<double>(r));
  return s;
}

/// Degree-r Chebyshev polynomial on [t0, t0 + tau].
struct ChebyshevSeries {
  double t0 = 0.0;
  double tau = 1.0;
  Vector coeffs;

  double operator()(double t) const {
    const double s = std::clamp(2.0 * (t - t0) / tau - 1.0, -1.0, 1.0);
    return clenshaw(coeffs, s);
  }
};

/// Collocation of z' = λ z + f(t), z(t0) = z0 on [t0, t0 + tau]: the ODE at
/// the r CGL nodes other than t0 together with the initial condition.
inline ChebyshevSeries collocate_scalar(double lambda, double z0, double t0, double tau, std::size_t r,
                                        const std::function<double(double)>& forcing = {}) {
  if (r < 1) throw PreconditionError("collocation: r must be >= 1");
  if (!(tau > 0.0)) throw PreconditionError("collocation: interval must be positive");
  const Vector s = cgl_nodes(r);
  DenseMatrix m(r + 1, r + 1);
  Vector rhs(r + 1, 0.0);
  for (std::size_t l = 0; l < r; ++l) {
    for (std::size_t k = 0; k <= r; ++k)
      m(l, k) = 2.0 / tau * chebyshev_derivative(k, s[l]) - lambda * chebyshev_T(k, s[l]);
    if (forcing) rhs[l] = forcing(t0 + 0.5 * (s[l] + 1.0) * tau);
  }
  for (std::size_t k = 0; k <= r; ++k) m(r, k) = k % 2 == 0 ? 1.0 : -1.0;
  rhs[r] = z0;
  const LuDecomposition lu(std::move(m));
  if (lu.singular())
    throw NumericalError("collocation: singular system for lambda = " + std::to_string(lambda));
  return {t0, tau, lu.solve(rhs)};
}

struct CollocationOptions {
  std::size_t r = 16;
  std::size_t windows = 1;  // equal sub-intervals of [0, T], collocated in turn
};

/// Windows needed to keep |λ| τ / 2 <= 1 for every mode: ceil(||A|| T / 2).
inline std::size_t collocation_windows(double norm_A, double T) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(norm_A * T / 2.0)));
}

/// Eigenbasis collocation: z = V^{-1} y decouples into d scalar modes, each
/// collocated on every window, then y(t) = V z(t) at the requested times.
inline Trajectory solve_collocation(const Diagonalization& dg, std::span<const double> y_in, double T,
                                    std::span<const double> times, const CollocationOptions& opt = {}) {
  if (!(T > 0.0)) throw PreconditionError("solve_collocation: T must be > 0");
  if (opt.windows == 0) throw PreconditionError("solve_collocation: windows must be >= 1");
  const double tau = T / static_cast<double>(opt.windows);
  struct Mode {
    Vector unit;    // coefficients for z0 = 1 on one window
    double growth;  // value at the window end
  };
  std::map<double, Mode> modes;
  for (double l : dg.lambda)
    if (!modes.count(l)) {
      ChebyshevSeries c = collocate_scalar(l, 1.0, 0.0, tau, opt.r);
      double g = 0.0;
      for (double x : c.coeffs) g += x;  // T_k(1) = 1
      modes.emplace(l, Mode{std::move(c.coeffs), g});
    }
  const Vector z0 = dg.apply_V_inv(y_in);
  Trajectory tr;
  tr.kind = TrajectoryKind::kCollocation;
  tr.block_size = dg.n;
  tr.times.assign(times.begin(), times.end());
  for (double t : times) {
    if (t < 0.0 || t > T * (1.0 + 1e-12)) throw PreconditionError("solve_collocation: time outside [0, T]");
    std::size_t w = std::min(opt.windows - 1, static_cast<std::size_t>(std::floor(t / tau)));
    const double s = std::clamp(2.0 * (t - tau * static_cast<double>(w)) / tau - 1.0, -1.0, 1.0);
    Vector z(z0.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
      const Mode& md = modes.at(dg.lambda[i]);
      z[i] = z0[i] * std::pow(md.growth, static_cast<double>(w)) * clenshaw(md.unit, s);
    }
    tr.states.push_back(dg.apply_V(z));
  }
  return tr;
}

/// Collocation of the full coupled system y' = A y (no diagonalization),
/// a d(r+1) dense solve per window; limited to d <= 30.
inline Trajectory solve_collocation_coupled(const CarlemanSystem& sys, std::span<const double> y_in, double T,
                                            std::span<const double> times, const CollocationOptions& opt = {}) {
  if (sys.d > 30) throw CapacityError("solve_collocation_coupled: d must be <= 30");
  if (!(T > 0.0)) throw PreconditionError("solve_collocation_coupled: T must be > 0");
  if (opt.windows == 0 || opt.r < 1) throw PreconditionError("solve_collocation_coupled: bad options");
  const std::size_t d = sys.d, r = opt.r, dim = d * (r + 1);
  const double tau = T / static_cast<double>(opt.windows);
  const DenseMatrix A = assemble(sys).to_dense();
  const Vector s = cgl_nodes(r);
  // unknown layout: coefficient k of component i at i*(r+1)+k
  DenseMatrix m(dim, dim);
  for (std::size_t l = 0; l < r; ++l)
    for (std::size_t i = 0; i < d; ++i) {
      const std::size_t row = l * d + i;
      for (std::size_t k = 0; k <= r; ++k) {
        const double Tk = chebyshev_T(k, s[l]);
        m(row, i * (r + 1) + k) += 2.0 / tau * chebyshev_derivative(k, s[l]);
        for (std::size_t j = 0; j < d; ++j)
          if (A(i, j) != 0.0) m(row, j * (r + 1) + k) -= A(i, j) * Tk;
      }
    }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k <= r; ++k) m(r * d + i, i * (r + 1) + k) = k % 2 == 0 ? 1.0 : -1.0;
  const LuDecomposition lu(std::move(m));
  if (lu.singular()) throw NumericalError("solve_collocation_coupled: singular system");

  std::vector<Vector> window_coeffs;
  Vector start(y_in.begin(), y_in.end());
  for (std::size_t w = 0; w < opt.windows; ++w) {
    Vector rhs(dim, 0.0);
    for (std::size_t i = 0; i < d; ++i) rhs[r * d + i] = start[i];
    Vector c = lu.solve(rhs);
    for (std::size_t i = 0; i < d; ++i) {
      double e = 0.0;
      for (std::size_t k = 0; k <= r; ++k) e += c[i * (r + 1) + k];
      start[i] = e;
    }
    window_coeffs.push_back(std::move(c));
  }
  Trajectory tr;
  tr.kind = TrajectoryKind::kCollocation;
  tr.block_size = sys.n;
  tr.times.assign(times.begin(), times.end());
  for (double t : times) {
    const std::size_t w = std::min(opt.windows - 1, static_cast<std::size_t>(std::floor(t / tau)));
    const double sx = std::clamp(2.0 * (t - tau * static_cast<double>(w)) / tau - 1.0, -1.0, 1.0);
    Vector y(d);
    for (std::size_t i = 0; i < d; ++i)
      y[i] = clenshaw(std::span<const double>(window_coeffs[w]).subspan(i * (r + 1), r + 1), sx);
    tr.states.push_back(std::move(y));
  }
  return tr;
}

// ---------------------------------------------------------------------------
// measurement emulation

struct MeasurementReport {
  double p_success = 0.0;
  std::size_t aa_rounds = 0;
  double norm_y = 0.0;
  double norm_u = 0.0;
  bool regime = false;          // ||u~|| < 1, where p >= 1/N is guaranteed
  bool bound_ok = false;        // p >= 1/N, meaningful only when regime holds
  bool norm_relation_ok = false;  // ||y||^2 <= N ||y_1||^2
};

/// Post-selection of the first block: p = ||y_1||^2 / ||y||^2 and the
/// ceil(1/sqrt p) amplitude-amplification rounds it implies.
inline MeasurementReport measurement_report(const CarlemanVector& y, std::size_t N) {
  if (y.blocks.empty() || N == 0) throw PreconditionError("measurement_report: empty Carleman vector");
  MeasurementReport m;
  double ssq = 0.0;
  for (const auto& b : y.blocks) {
    const double nb = l2_norm(b);
    ssq += nb * nb;
  }
  m.norm_y = std::sqrt(ssq);
  m.norm_u = l2_norm(y.blocks.front());
  if (!(m.norm_y > 0.0)) throw PreconditionError("measurement_report: zero vector");
  m.p_success = (m.norm_u * m.norm_u) / ssq;
  m.aa_rounds = static_cast<std::size_t>(std::ceil(1.0 / std::sqrt(m.p_success) - 1e-12));
  m.regime = m.norm_u < 1.0;
  m.bound_ok = m.regime && m.p_success >= 1.0 / static_cast<double>(N) - 1e-12;
  m.norm_relation_ok = ssq <= static_cast<double>(N) * m.norm_u * m.norm_u * (1.0 + 1e-12);
  return m;
}

inline MeasurementReport measurement_report(const CarlemanSystem& sys, std::span<const double> y) {
  return measurement_report(sys.split(y), sys.N);
}

struct HistoryStats {
  double G = 0.0;
  double p_lower = 0.0;
};

/// G = sqrt(Σ_k ||y_1(kh)||^2 / (m+1)) and p >= 2G^2 / (16 max ||y||^2 + G^2).
inline HistoryStats history_norm_stats(const Trajectory& tr) {
  if (tr.states.empty()) throw PreconditionError("history_norm_stats: empty trajectory");
  double s = 0.0, max_y2 = 0.0;
  for (std::size_t i = 0; i < tr.states.size(); ++i) {
    const double n1 = l2_norm(tr.first_block(i));
    s += n1 * n1;
    const double ny = l2_norm(tr.states[i]);
    max_y2 = std::max(max_y2, ny * ny);
  }
  HistoryStats h;
  h.G = std::sqrt(s / static_cast<double>(tr.states.size()));
  const double den = 16.0 * max_y2 + h.G * h.G;
  h.p_lower = den > 0.0 ? 2.0 * h.G * h.G / den : 0.0;
  return h;
}

}  // namespace carleman
