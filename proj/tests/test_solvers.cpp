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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "carleman/bounds.hpp"
#include "carleman/chebyshev.hpp"
#include "carleman/solvers.hpp"
#include "carleman/spectrum.hpp"

namespace carleman {
namespace {

QuadraticOde scalar_ode(double lambda, double b, double u0) {
  QuadraticOde ode;
  ode.n = 1;
  ode.F1 = SparseMatrix::from_dense(DenseMatrix{{lambda}});
  ode.F2 = SparseMatrix::from_dense(DenseMatrix{{b}});
  ode.u_in = {u0};
  ode.lambda_F1 = {lambda};
  ode.norm_F1 = std::abs(lambda);
  ode.norm_F2 = std::abs(b);
  return ode;
}

/// Scalar linear system y' = λ y packaged as an order-1 Carleman system.
CarlemanSystem scalar_system(double lambda) { return build_carleman(scalar_ode(lambda, 0.0, 1.0), 1); }

double max_block_error(const Trajectory& ref, const Trajectory& tr) {
  double worst = 0.0;
  for (std::size_t k = 0; k < ref.states.size(); ++k)
    worst = std::max(worst, l2_norm(subtract(ref.states[k], Vector(tr.first_block(k).begin(),
                                                                    tr.first_block(k).end()))));
  return worst;
}

FisherKppProblem linear_desk() {
  FisherKppProblem p;
  p.b = 0.0;
  return p;
}

// ---------------------------------------------------------------------------
// reference

TEST(Reference, ScalarDecay) {
  const auto tr = solve_reference(scalar_ode(-2.0, 0.0, 1.0), 1.0, 4);
  EXPECT_NEAR(tr.final_state()[0], std::exp(-2.0), 1e-9);
  EXPECT_EQ(tr.times.front(), 0.0);
  EXPECT_EQ(tr.times.back(), 1.0);
}

TEST(Reference, LogisticClosedForm) {
  const auto tr = solve_reference(scalar_ode(0.4, -1.0, 0.1), 5.0, 50);
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    const double e = std::exp(0.4 * tr.times[k]);
    EXPECT_NEAR(tr.states[k][0], 0.4 * 0.1 * e / (0.4 + 0.1 * (e - 1.0)), 1e-8);
  }
}

TEST(Reference, DeskSolutionDecays) {
  const auto tr = solve_reference(discretize(FisherKppProblem{}, 8), 3.0, 60);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_LT(std::abs(tr.final_state()[j]), tr.states[0][j]);
  for (std::size_t k = 1; k < tr.states.size(); ++k)
    EXPECT_LE(l2_norm(tr.states[k]), l2_norm(tr.states[k - 1]) * (1.0 + 1e-12));
}

TEST(Reference, BlowUpIsReported) {
  EXPECT_THROW(solve_reference(scalar_ode(0.0, 1.0, 1.0), 2.0, 4), NumericalError);
}

TEST(Reference, RejectsBadSampleTimes) {
  const auto ode = scalar_ode(-1.0, 0.0, 1.0);
  EXPECT_THROW(solve_reference(ode, Vector{0.5, 1.0}), PreconditionError);
  EXPECT_THROW(solve_reference(ode, Vector{0.0, 1.0, 1.0}), PreconditionError);
  EXPECT_THROW(solve_reference(ode, 0.0), PreconditionError);
}

// ---------------------------------------------------------------------------
// Euler and Taylor

TEST(Euler, ZeroMatrixIsConstant) {
  const auto sys = scalar_system(0.0);
  const auto tr = solve_euler(sys, Vector{2.5}, 10, 1.0);
  for (const auto& s : tr.states) EXPECT_EQ(s[0], 2.5);
  EXPECT_EQ(tr.states.size(), 11u);
}

TEST(Euler, ScalarRecurrence) {
  const auto tr = solve_euler(scalar_system(-1.0), Vector{1.0}, 5000, 1.0);
  EXPECT_NEAR(tr.final_state()[0], std::pow(1.0 - 1.0 / 5000, 5000), 1e-13);
  EXPECT_NEAR(tr.final_state()[0], std::exp(-1.0), 2e-4);
}

TEST(Euler, FirstOrderConvergence) {
  double prev = 0.0;
  for (std::size_t m : {100u, 200u, 400u, 800u, 1600u}) {
    const double err = std::abs(solve_euler(scalar_system(-1.0), Vector{1.0}, m, 1.0).final_state()[0] - std::exp(-1.0));
    if (prev > 0.0) {
      EXPECT_GE(prev / err, 1.8);
      EXPECT_LE(prev / err, 2.2);
    }
    prev = err;
  }
}

TEST(Euler, DivergenceGuard) {
  EXPECT_THROW(solve_euler(scalar_system(-100.0), Vector{1.0}, 10, 1.0), NumericalError);
}

TEST(Euler, EndpointOnlyMode) {
  StepOptions opt;
  opt.history = false;
  const auto tr = solve_euler(scalar_system(-1.0), Vector{1.0}, 50, 1.0, opt);
  ASSERT_EQ(tr.states.size(), 2u);
  EXPECT_EQ(tr.times.back(), 1.0);
}

TEST(Euler, StepLimitFormula) { EXPECT_DOUBLE_EQ(euler_step_limit(3, 65.2), 1.0 / (9 * 65.2)); }

TEST(Taylor, OrderOneIsEuler) {
  const auto sys = build_carleman(discretize(FisherKppProblem{}, 4), 2);
  const Vector y = lift_initial(discretize(FisherKppProblem{}, 4).u_in, 2).flatten();
  const auto a = solve_taylor(sys, y, 1, 300, 1.0), b = solve_euler(sys, y, 300, 1.0);
  for (std::size_t k = 0; k < a.states.size(); ++k) EXPECT_EQ(a.states[k], b.states[k]);
}

TEST(Taylor, ScalarLocalErrorWithinBound) {
  const double h = 0.01;
  const auto tr = solve_taylor(scalar_system(-1.0), Vector{1.0}, 4, 1, h);
  const double err = std::abs(tr.final_state()[0] - std::exp(-h));
  EXPECT_LE(err, bound_taylor(1.0, h, 4, 1.0));
  EXPECT_LE(err, std::pow(h, 5) / 120.0 * std::exp(1.0));
}

TEST(Taylor, RejectsOrderZero) {
  EXPECT_THROW(solve_taylor(scalar_system(-1.0), Vector{1.0}, 0, 10, 1.0), PreconditionError);
}

TEST(Taylor, DeskErrorDecreasesWithOrder) {
  const auto ode = discretize(FisherKppProblem{}, 8);
  const auto sys = build_carleman(ode, 3);
  const Vector y = lift_initial(ode.u_in, 3).flatten();
  const auto ref = solve_reference(ode, uniform_times(3.0, 2000));
  double prev = INFINITY;
  for (std::size_t K : {1u, 2u, 3u}) {
    const double e = max_block_error(ref, solve_taylor(sys, y, K, 2000, 3.0));
    EXPECT_LT(e, prev) << "K=" << K;
    prev = e;
  }
}

// ---------------------------------------------------------------------------
// Chebyshev

TEST(ChebyshevScale, Examples) {
  auto s = chebyshev_scale(Vector{-1.0, 1.0});
  EXPECT_EQ(s.alpha, 0.0);
  EXPECT_EQ(s.beta, 1.0);
  s = chebyshev_scale(Vector{-8.0, -2.0, -5.0});
  EXPECT_EQ(s.alpha, -5.0);
  EXPECT_EQ(s.beta, 3.0);
}

TEST(ChebyshevScale, DeskEigenvaluesInsideInterval) {
  const auto lam = enumerate_eigenvalues(f1_spectrum(8, 0.2, 0.4), 3).values();
  const auto s = chebyshev_scale(lam);
  for (double l : lam) EXPECT_LE(std::abs((l - s.alpha) / s.beta), 1.0 + 1e-12);
}

TEST(ChebyshevScale, DegenerateSpectrumIsExact) {
  const ChebyshevPropagator p(chebyshev_scale(Vector{-2.0, -2.0}), 1.5, 4);
  EXPECT_DOUBLE_EQ(p(-2.0), std::exp(-3.0));
}

TEST(Bessel, Examples) {
  EXPECT_EQ(bessel_I(0, 0.0), 1.0);
  for (std::size_t k = 1; k < 5; ++k) EXPECT_EQ(bessel_I(k, 0.0), 0.0);
  EXPECT_NEAR(bessel_I(0, 1.0), 1.2660658777520082, 1e-15);
  EXPECT_THROW(bessel_I(0, 701.0), PreconditionError);
  EXPECT_THROW(bessel_I(0, -1.0), PreconditionError);
}

TEST(Bessel, SeriesMatchesQuadrature) {
  const int m = 10000;
  for (double t : {0.5, 1.0, 3.0, 10.0})
    for (std::size_t k : {0u, 1u, 2u, 5u, 12u}) {
      double s = 0.0;
      for (int i = 0; i <= m; ++i) {
        const double th = std::numbers::pi * i / m;
        const double w = (i == 0 || i == m) ? 0.5 : 1.0;
        s += w * std::exp(t * std::cos(th)) * std::cos(static_cast<double>(k) * th);
      }
      const double quad = s / m;
      const double series = bessel_I(k, t);
      EXPECT_NEAR(series, quad, 1e-12 * std::max(1.0, std::abs(quad))) << "k=" << k << " t=" << t;
    }
}

TEST(Bessel, ScaledAgreesWithUnscaled) {
  for (double t : {0.3, 2.0, 40.0})
    for (std::size_t k : {0u, 3u, 9u})
      EXPECT_NEAR(bessel_I_scaled(k, t), std::exp(-t) * bessel_I(k, t), 1e-14 * std::max(1.0, bessel_I_scaled(k, t)));
}

TEST(ChebyshevCoefficients, ZeroTime) {
  const Vector c = chebyshev_coefficients(0.0, 6);
  EXPECT_EQ(c[0], 1.0);
  for (std::size_t k = 1; k <= 6; ++k) EXPECT_EQ(c[k], 0.0);
  EXPECT_EQ(clenshaw(c, 0.3), 1.0);
}

TEST(ChebyshevCoefficients, EndpointsReproduceExponential) {
  const Vector c = chebyshev_coefficients(1.0, 20);
  EXPECT_NEAR(clenshaw(c, 1.0), std::exp(1.0), 1e-10);
  EXPECT_NEAR(clenshaw(c, -1.0), std::exp(-1.0), 1e-10);
}

TEST(ChebyshevCoefficients, AlternatingFormForDecay) {
  // 2(-1)^k I_k(t) expands e^{-xt}
  const std::size_t r = 20;
  Vector c = chebyshev_coefficients(2.0, r);
  for (std::size_t k = 1; k <= r; k += 2) c[k] = -c[k];
  for (double x : {-0.7, 0.0, 0.4, 1.0}) EXPECT_NEAR(clenshaw(c, x), std::exp(-2.0 * x), 1e-10);
}

TEST(Clenshaw, MatchesDirectSum) {
  const Vector c{0.5, -1.0, 0.25, 2.0};
  for (double x : {-1.0, -0.3, 0.0, 0.8, 1.0}) {
    double direct = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) direct += c[k] * std::cos(static_cast<double>(k) * std::acos(x));
    EXPECT_NEAR(clenshaw(c, x), direct, 1e-14);
  }
}

TEST(TruncationOrder, FormulaArithmetic) {
  const auto o = truncation_order(1.0, 1e-6);
  EXPECT_EQ(o.formula_r, 16u);
  EXPECT_EQ(o.r, 16u);
  EXPECT_EQ(o.doublings, 0);
}

TEST(TruncationOrder, LooseToleranceLimit) {
  EXPECT_EQ(truncation_order(4.0, 1.0 - 1e-12).formula_r,
            static_cast<std::size_t>(std::ceil(std::exp(1.25) * 4.0 / 2.0)));
}

TEST(TruncationOrder, ValidatedOnGrid) {
  for (double t : {1.0, 3.0})
    for (double eps : {1e-4, 1e-8}) {
      const auto o = truncation_order(t, eps);
      EXPECT_LE(o.achieved_error, eps);
      EXPECT_LE(chebyshev_max_error(t, o.r), eps);
    }
}

TEST(TruncationOrder, FidelityForSmallTimes) {
  for (double t : {0.1, 0.5, 1.5, 2.0, 2.5, 3.0})
    for (double eps : {1e-3, 1e-6, 1e-10}) {
      const auto o = truncation_order(t, eps);
      EXPECT_LE(chebyshev_max_error(t, o.r), eps) << t << " " << eps;
    }
}

TEST(TruncationOrder, RejectsBadArguments) {
  EXPECT_THROW(truncation_order(1.0, 0.0), PreconditionError);
  EXPECT_THROW(truncation_order(1.0, 1.0), PreconditionError);
  EXPECT_THROW(truncation_order(0.0, 1e-3), PreconditionError);
}

// ---------------------------------------------------------------------------
// matrix exponential

TEST(Matexp, ZeroTimeIsIdentity) {
  const auto ode = discretize(FisherKppProblem{}, 3);
  const auto sys = build_carleman(ode, 3);
  const auto dg = iterative_diagonalize(sys, ode);
  const Vector y = lift_initial(ode.u_in, 3).flatten();
  const Vector out = propagate_matexp(dg, y, 0.0, 1e-10);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(out[i], y[i], 1e-8 * dg.kappa_direct * l2_norm(y));
}

TEST(Matexp, LinearDeskMatchesReference) {
  const auto ode = discretize(linear_desk(), 8);
  const auto sys = build_carleman(ode, 3);
  const auto dg = iterative_diagonalize(sys, ode);
  const Vector y = lift_initial(ode.u_in, 3).flatten();
  const auto ref = solve_reference(ode, uniform_times(3.0, 10));
  const auto tr = matexp_trajectory(dg, y, ref.times, 1e-10);
  EXPECT_LE(max_block_error(ref, tr), 1e-6);
}

TEST(Matexp, Semigroup) {
  const auto ode = discretize(FisherKppProblem{}, 4);
  const auto sys = build_carleman(ode, 3);
  const auto dg = iterative_diagonalize(sys, ode);
  const Vector y = lift_initial(ode.u_in, 3).flatten();
  const Vector full = propagate_matexp(dg, y, 2.0, 1e-12);
  const Vector half = propagate_matexp(dg, propagate_matexp(dg, y, 1.0, 1e-12), 1.0, 1e-12);
  EXPECT_LE(l2_norm(subtract(full, half)), 1e-7 * l2_norm(full));
}

TEST(Matexp, OutOfIntervalEigenvalueRejected) {
  const ChebyshevPropagator p(chebyshev_scale(Vector{-4.0, -2.0}), 1.0, 10);
  EXPECT_THROW(p(-5.0), PreconditionError);
  EXPECT_NEAR(p(-3.0), std::exp(-3.0), 1e-6);
}

TEST(Matexp, DeskErrorDecreasesWithOrder) {
  const auto ode = discretize(FisherKppProblem{}, 8);
  const auto sys = build_carleman(ode, 3);
  const auto dg = iterative_diagonalize(sys, ode);
  const Vector y = lift_initial(ode.u_in, 3).flatten();
  const auto ref = solve_reference(ode, uniform_times(3.0, 64));
  double prev = INFINITY;
  for (std::size_t K : {1u, 2u, 3u}) {
    const double e = max_block_error(ref, matexp_trajectory(dg, y, 3.0, 64, K));
    EXPECT_LT(e, prev) << "K=" << K;
    prev = e;
  }
}

// ---------------------------------------------------------------------------
// collocation

TEST(Collocation, ZeroModeIsConstant) {
  const auto c = collocate_scalar(0.0, 1.7, 0.0, 2.0, 8);
  for (double t : {0.0, 0.5, 1.3, 2.0}) EXPECT_NEAR(c(t), 1.7, 1e-14);
}

TEST(Collocation, ScalarExponential) {
  const auto c = collocate_scalar(-1.0, 1.0, 0.0, 1.0, 16);
  EXPECT_NEAR(c(1.0), std::exp(-1.0), 1e-10);
  EXPECT_NEAR(c(0.0), 1.0, 1e-14);
}

TEST(Collocation, PolynomialForcingReproducedExactly) {
  // z' = z + f with z = t^3 - 2t + 1 exact, f = z' - z
  auto z = [](double t) { return t * t * t - 2.0 * t + 1.0; };
  auto f = [&](double t) { return 3.0 * t * t - 2.0 - z(t); };
  const auto c = collocate_scalar(1.0, z(0.5), 0.5, 1.5, 6, f);
  for (double t : {0.5, 0.9, 1.4, 2.0}) EXPECT_NEAR(c(t), z(t), 1e-12);
}

TEST(Collocation, NodesAreLobatto) {
  const Vector s = cgl_nodes(4);
  EXPECT_DOUBLE_EQ(s[0], 1.0);
  EXPECT_NEAR(s[2], 0.0, 1e-16);
  EXPECT_DOUBLE_EQ(s[4], -1.0);
  EXPECT_NEAR(chebyshev_derivative(3, 0.2), 12.0 * 0.04 - 3.0, 1e-13);
  EXPECT_EQ(chebyshev_derivative(3, -1.0), 9.0);
}

TEST(Collocation, WithinBoundOnDesk) {
  const auto ode = discretize(FisherKppProblem{}, 8);
  const auto sys = build_carleman(ode, 3);
  const auto dg = iterative_diagonalize(sys, ode);
  const Vector y = lift_initial(ode.u_in, 3).flatten();
  const double T = 3.0;
  const auto times = uniform_times(T, 20);
  CollocationOptions opt;
  opt.windows = collocation_windows(norm_bound(8, 3, 0.2, 0.4, -1.0), T);
  const auto col = solve_collocation(dg, y, T, times, opt);
  const auto exact = matexp_trajectory(dg, y, times, 1e-13);
  double worst = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k)
    worst = std::max(worst, l2_norm(subtract(col.states[k], exact.states[k])));
  EXPECT_LE(worst, bound_collocation(opt.windows, dg.kappa_direct, l2_norm(y), opt.r));
}

TEST(Collocation, CoupledAgreesWithDecoupled) {
  const auto ode = discretize(FisherKppProblem{}, 2);
  const auto sys = build_carleman(ode, 3);
  const auto dg = iterative_diagonalize(sys, ode);
  const Vector y = lift_initial(ode.u_in, 3).flatten();
  const double T = 1.0;
  const auto times = uniform_times(T, 8);
  CollocationOptions opt;
  opt.r = 20;
  opt.windows = collocation_windows(norm_bound(2, 3, 0.2, 0.4, -1.0), T);
  const auto a = solve_collocation(dg, y, T, times, opt);
  const auto b = solve_collocation_coupled(sys, y, T, times, opt);
  for (std::size_t k = 0; k < times.size(); ++k)
    EXPECT_LE(l2_norm(subtract(a.states[k], b.states[k])), 1e-9 * l2_norm(y));
}

TEST(Collocation, CoupledCapEnforced) {
  const auto ode = discretize(FisherKppProblem{}, 6);
  const auto sys = build_carleman(ode, 2);
  const Vector y = lift_initial(ode.u_in, 2).flatten();
  EXPECT_THROW(solve_collocation_coupled(sys, y, 1.0, uniform_times(1.0, 2)), CapacityError);
}

// ---------------------------------------------------------------------------
// propagator agreement on the linear problem

TEST(Agreement, AllPropagatorsMatchLinearReference) {
  const auto ode = discretize(linear_desk(), 8);
  const auto sys = build_carleman(ode, 3);
  const auto dg = iterative_diagonalize(sys, ode);
  const Vector y = lift_initial(ode.u_in, 3).flatten();
  const double T = 3.0;
  const auto ref = solve_reference(ode, uniform_times(T, 5000));

  const auto eul = solve_euler(sys, y, 5000, T);
  EXPECT_LE(max_block_error(ref, eul), 5e-3);

  const auto tay = solve_taylor(sys, y, 4, 5000, T);
  EXPECT_LE(max_block_error(ref, tay), 1e-5);

  const auto coarse_ref = solve_reference(ode, uniform_times(T, 30));
  EXPECT_LE(max_block_error(coarse_ref, matexp_trajectory(dg, y, coarse_ref.times, 1e-10)), 1e-5);

  CollocationOptions opt;
  opt.windows = collocation_windows(norm_bound(8, 3, 0.2, 0.4, 0.0), T);
  EXPECT_LE(max_block_error(coarse_ref, solve_collocation(dg, y, T, coarse_ref.times, opt)), 1e-5);
}

// ---------------------------------------------------------------------------
// measurement

TEST(Measurement, OrderOneAlwaysSucceeds) {
  const auto m = measurement_report(lift_initial(Vector{0.3, 0.1}, 1), 1);
  EXPECT_DOUBLE_EQ(m.p_success, 1.0);
  EXPECT_EQ(m.aa_rounds, 1u);
}

TEST(Measurement, GeometricCase) {
  const auto m = measurement_report(lift_initial(Vector{0.3, 0.4}, 3), 3);
  const double expect = 0.25 / (0.25 + 0.0625 + 0.015625);
  EXPECT_NEAR(m.p_success, expect, 1e-15);
  EXPECT_EQ(m.aa_rounds, 2u);
  EXPECT_TRUE(m.regime);
  EXPECT_TRUE(m.bound_ok);
  EXPECT_TRUE(m.norm_relation_ok);
  EXPECT_NEAR(m.norm_y * m.norm_y, 0.328125, 1e-15);
}

TEST(Measurement, LargeStateLeavesRegime) {
  const auto m = measurement_report(lift_initial(Vector{2.0}, 3), 3);
  EXPECT_FALSE(m.regime);
  EXPECT_FALSE(m.bound_ok);
  EXPECT_FALSE(m.norm_relation_ok);
}

TEST(Measurement, ZeroVectorRejected) {
  EXPECT_THROW(measurement_report(lift_initial(Vector{0.0, 0.0}, 2), 2), PreconditionError);
}

TEST(Measurement, RescaledDeskAboveOneThird) {
  const auto r = rescale(discretize(FisherKppProblem{}, 8));
  const auto sys = build_carleman(r.ode, 3);
  const auto dg = iterative_diagonalize(sys, r.ode);
  const Vector y = lift_initial(r.ode.u_in, 3).flatten();
  for (double T : {1.0, 3.0}) {
    const auto m = measurement_report(sys, propagate_matexp(dg, y, T, 1e-10));
    EXPECT_GE(m.p_success, 1.0 / 3.0);
    EXPECT_TRUE(m.bound_ok);
    EXPECT_TRUE(m.norm_relation_ok);
  }
}

TEST(HistoryStats, ConstantTrajectory) {
  Trajectory tr;
  tr.block_size = 2;
  tr.times = {0.0, 1.0, 2.0};
  tr.states.assign(3, Vector{0.6, 0.8});
  const auto h = history_norm_stats(tr);
  EXPECT_DOUBLE_EQ(h.G, 1.0);
  EXPECT_NEAR(h.p_lower, 2.0 / 17.0, 1e-15);
}

TEST(HistoryStats, SinglePoint) {
  Trajectory tr;
  tr.block_size = 1;
  tr.times = {0.0};
  tr.states = {Vector{0.5, 0.25}};
  EXPECT_DOUBLE_EQ(history_norm_stats(tr).G, 0.5);
}

TEST(HistoryStats, DeskEulerRun) {
  const auto ode = discretize(FisherKppProblem{}, 4);
  const auto sys = build_carleman(ode, 2);
  const auto h = history_norm_stats(solve_euler(sys, lift_initial(ode.u_in, 2).flatten(), 500, 3.0));
  EXPECT_GT(h.p_lower, 0.0);
  EXPECT_LE(h.p_lower, 1.0);
}

}  // namespace
}  // namespace carleman
