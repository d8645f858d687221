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

#include <random>

#include "carleman/embedding.hpp"
#include "carleman/solvers.hpp"
#include "carleman/spectrum.hpp"

namespace carleman {
namespace {

Vector random_vector(std::mt19937& rng, std::size_t n) {
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  Vector v(n);
  for (double& x : v) x = val(rng);
  return v;
}

double trace(const SparseMatrix& m) {
  double t = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) t += m.at(i, i);
  return t;
}

TEST(DiagBlock, FirstIsF1) {
  const auto ode = discretize(FisherKppProblem{}, 4);
  EXPECT_EQ(build_diag_block(ode.F1, 1).to_dense().data(), ode.F1.to_dense().data());
}

TEST(DiagBlock, KroneckerSumOfDiagonal) {
  const double al = -1.5, be = 0.25;
  const auto F1 = SparseMatrix::diagonal(Vector{al, be});
  const auto B = build_diag_block(F1, 2).to_dense();
  const Vector expect{2 * al, al + be, be + al, 2 * be};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(B(i, j), i == j ? expect[i] : 0.0);
}

TEST(DiagBlock, TraceIdentity) {
  const auto ode = discretize(FisherKppProblem{}, 3);
  const double t1 = trace(ode.F1);
  for (std::size_t j = 1; j <= 4; ++j) {
    const double expect = static_cast<double>(j) * std::pow(3.0, static_cast<double>(j - 1)) * t1;
    EXPECT_NEAR(trace(build_diag_block(ode.F1, j)), expect, 1e-10 * std::abs(expect));
  }
}

TEST(DiagBlock, ActionOnProductStates) {
  std::mt19937 rng(7);
  const auto ode = discretize(FisherKppProblem{}, 3);
  const Vector u = random_vector(rng, 3), v = random_vector(rng, 3);
  const Vector lhs = matvec(build_diag_block(ode.F1, 2), kron_vec(u, v));
  const Vector rhs = [&] {
    Vector a = kron_vec(matvec(ode.F1, u), v);
    axpy(1.0, kron_vec(u, matvec(ode.F1, v)), a);
    return a;
  }();
  for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-12);
}

TEST(SuperBlock, FirstIsF2AndShape) {
  const auto ode = discretize(FisherKppProblem{}, 2);
  EXPECT_EQ(build_super_block(ode.F2, 1).to_dense().data(), ode.F2.to_dense().data());
  const auto S = build_super_block(ode.F2, 2);
  EXPECT_EQ(S.rows(), 4u);
  EXPECT_EQ(S.cols(), 8u);
}

TEST(SuperBlock, ActionOnCubes) {
  std::mt19937 rng(8);
  for (std::size_t n : {2u, 3u}) {
    const auto ode = discretize(FisherKppProblem{}, n);
    const Vector u = random_vector(rng, n);
    const Vector uu = kron_vec(u, u);
    const Vector lhs = matvec(build_super_block(ode.F2, 2), kron_vec(uu, u));
    const Vector f = matvec(ode.F2, uu);
    Vector rhs = kron_vec(f, u);
    axpy(1.0, kron_vec(u, f), rhs);
    for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-14);
  }
}

TEST(Assemble, OrderOneIsF1) {
  const auto ode = discretize(FisherKppProblem{}, 5);
  const auto sys = build_carleman(ode, 1);
  EXPECT_EQ(assemble(sys).to_dense().data(), ode.F1.to_dense().data());
}

TEST(Assemble, DeskDimension) {
  const auto ode = discretize(FisherKppProblem{}, 8);
  const auto sys = build_carleman(ode, 3);
  const auto A = assemble(sys);
  EXPECT_EQ(sys.d, 584u);
  EXPECT_EQ(A.rows(), 584u);
  EXPECT_EQ(A.cols(), 584u);
  EXPECT_LE(A.max_row_nnz(), 9u);
  EXPECT_EQ(sys.diag_blocks.size(), 3u);
  EXPECT_EQ(sys.super_blocks.size(), 2u);
}

TEST(Assemble, BlockPlacement) {
  const auto ode = discretize(FisherKppProblem{}, 2);
  const auto sys = build_carleman(ode, 3, 0.5);
  const auto A = assemble(sys).to_dense();
  const auto S1 = sys.super_blocks[0].to_dense();
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(A(i, 2 + j), 0.5 * S1(i, j));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 6; j < 14; ++j) EXPECT_EQ(A(i, j), 0.0);
  for (std::size_t i = 2; i < 14; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(A(i, j), 0.0);
}

TEST(Assemble, GammaScalesOnlySuperBlocks) {
  const auto ode = discretize(FisherKppProblem{}, 3);
  const auto sys = build_carleman(ode, 3);
  const auto A1 = assemble(sys, 1.0).to_dense(), Ag = assemble(sys, 2.5).to_dense();
  for (std::size_t i = 0; i < sys.d; ++i)
    for (std::size_t j = 0; j < sys.d; ++j) {
      const bool super = sys.block_of_row(i) < sys.block_of_row(j);
      EXPECT_DOUBLE_EQ(Ag(i, j), super ? 2.5 * A1(i, j) : A1(i, j));
    }
}

TEST(Assemble, ZeroGammaDecouplesBlockOne) {
  FisherKppProblem p;
  const auto ode = discretize(p, 4);
  const auto sys = build_carleman(ode, 3, 0.0);
  const auto dg = iterative_diagonalize(sys, ode);
  const Vector y = lift_initial(ode.u_in, 3).flatten();
  const Vector yT = propagate_matexp(dg, y, 1.0, 1e-12);
  p.b = 0.0;
  const auto ref = solve_reference(discretize(p, 4), 1.0, 1);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(yT[i], ref.final_state()[i], 1e-9);
}

TEST(Assemble, MatvecMatchesBlockwiseApply) {
  std::mt19937 rng(9);
  const auto ode = discretize(FisherKppProblem{}, 3);
  const auto sys = build_carleman(ode, 3, 1.7);
  const Vector y = random_vector(rng, sys.d);
  const Vector a = matvec(assemble(sys), y), b = sys.apply(y);
  for (std::size_t i = 0; i < sys.d; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Dimension, Examples) {
  EXPECT_EQ(carleman_dimension(8, 3), 584u);
  EXPECT_EQ(carleman_dimension(2, 1), 2u);
  EXPECT_EQ(carleman_dimension(4, 5), 1364u);
  EXPECT_EQ(carleman_dimension(1, 4), 4u);
}

TEST(Dimension, MatchesClosedForm) {
  for (std::size_t n = 2; n <= 6; ++n)
    for (std::size_t N = 1; N <= 5; ++N) {
      std::size_t p = n;
      for (std::size_t k = 0; k < N; ++k) p *= n;
      EXPECT_EQ(carleman_dimension(n, N), (p - n) / (n - 1));
    }
}

TEST(Dimension, CapIsEnforced) {
  EXPECT_THROW(carleman_dimension(32, 4), CapacityError);
  EXPECT_THROW(build_carleman(discretize(FisherKppProblem{}, 32), 4), CapacityError);
  Limits lim;
  lim.max_dimension = 50;
  EXPECT_THROW(carleman_dimension(8, 2, lim), CapacityError);
}

TEST(Lift, UnitBasisStaysUnit) {
  const auto y = lift_initial(Vector{1, 0, 0}, 3);
  for (const auto& b : y.blocks) {
    EXPECT_DOUBLE_EQ(l2_norm(b), 1.0);
    EXPECT_EQ(b.front(), 1.0);
  }
}

TEST(Lift, NormsAreMultiplicative) {
  const auto y = lift_initial(Vector{0.3, 0.4}, 3);
  ASSERT_EQ(y.blocks.size(), 3u);
  EXPECT_NEAR(l2_norm(y.blocks[0]), 0.5, 1e-15);
  EXPECT_NEAR(l2_norm(y.blocks[1]), 0.25, 1e-15);
  EXPECT_NEAR(l2_norm(y.blocks[2]), 0.125, 1e-15);
  EXPECT_EQ(y.flatten().size(), 14u);
}

TEST(Lift, ScalarPowers) {
  EXPECT_EQ(lift_initial(Vector{3.0}, 3).flatten(), (Vector{3, 9, 27}));
}

TEST(NormBound, Examples) {
  EXPECT_DOUBLE_EQ(norm_bound(8, 1, 0.2, 0.4, 0.0), norm_f1_closed_form(8, 0.2, 0.4));
  EXPECT_NEAR(norm_bound(8, 3, 0.2, 0.4, -1.0), 198.6, 1e-12);
}

TEST(NormBound, DominatesSpectralNorm) {
  const auto ode = discretize(FisherKppProblem{}, 4);
  const auto A = assemble(build_carleman(ode, 3));
  EXPECT_GE(norm_bound(4, 3, 0.2, 0.4, -1.0), spectral_norm(A, 1e-10).value);
}

TEST(GeneralDegree, QuadraticReproducesAssemble) {
  const auto ode = discretize(FisherKppProblem{}, 3);
  const auto a = assemble(build_general_degree(ode.F1, ode.F2, 2, 3)).to_dense();
  const auto b = assemble(build_carleman(ode, 3)).to_dense();
  EXPECT_EQ(a.data(), b.data());
}

TEST(GeneralDegree, CubicBlockPattern) {
  const auto ode = discretize(FisherKppProblem{}, 2);
  const auto F3 = monomial_term(2, 3, -1.0);
  const auto sys = build_general_degree(ode.F1, F3, 3, 3);
  ASSERT_EQ(sys.super_blocks.size(), 1u);
  EXPECT_EQ(sys.super_blocks[0].to_dense().data(), F3.to_dense().data());
  EXPECT_EQ(sys.super_column(0), 2u);
  const auto A = assemble(sys).to_dense();
  // block row 1 touches only block columns 1 and 3
  for (std::size_t j = 2; j < 6; ++j) EXPECT_EQ(A(0, j), 0.0);
  for (std::size_t j = 6; j < 14; ++j) EXPECT_DOUBLE_EQ(A(0, j), F3.at(0, j - 6));
  for (std::size_t i = 2; i < 6; ++i)
    for (std::size_t j = 6; j < 14; ++j) EXPECT_EQ(A(i, j), 0.0);
}

TEST(GeneralDegree, SpectrumUnchangedByDegree) {
  const auto ode = discretize(FisherKppProblem{}, 2);
  const auto s3 = build_general_degree(ode.F1, monomial_term(2, 3, -1.0), 3, 3);
  const auto s2 = build_carleman(ode, 3);
  auto e3 = iterative_diagonalize(s3, ode).lambda, e2 = iterative_diagonalize(s2, ode).lambda;
  std::sort(e3.begin(), e3.end());
  std::sort(e2.begin(), e2.end());
  EXPECT_EQ(e3, e2);
}

TEST(GeneralDegree, MixedDegreeUnsupported) {
  const auto ode = discretize(FisherKppProblem{}, 2);
  const std::vector<MonomialTerm> mixed{{2, ode.F2}, {3, monomial_term(2, 3, 1.0)}};
  EXPECT_THROW(build_polynomial(ode.F1, mixed, 3), UnsupportedError);
  EXPECT_NO_THROW(build_polynomial(ode.F1, {{2, ode.F2}}, 3));
}

TEST(GeneralDegree, RejectsBadShapes) {
  const auto ode = discretize(FisherKppProblem{}, 2);
  EXPECT_THROW(build_general_degree(ode.F1, ode.F2, 3, 3), DimensionError);
  EXPECT_THROW(build_general_degree(ode.F1, ode.F2, 1, 3), PreconditionError);
  EXPECT_THROW(build_carleman(ode, 0), PreconditionError);
}

TEST(Invariants, SparsityAndDimension) {
  for (std::size_t n : {2u, 3u, 5u, 8u})
    for (std::size_t N : {1u, 2u, 3u}) {
      const auto sys = build_carleman(discretize(FisherKppProblem{}, n), N);
      const auto A = assemble(sys);
      EXPECT_LE(A.max_row_nnz(), 3 * N);
      EXPECT_EQ(A.rows(), carleman_dimension(n, N));
    }
}

TEST(Invariants, DerivativeOfLiftAtZero) {
  const auto ode = discretize(FisherKppProblem{}, 4);
  const auto r = rescale(ode);
  const auto sys = build_carleman(r.ode, 3, 1.0);
  const Vector y = lift_initial(r.ode.u_in, 3).flatten();
  const Vector Ay = sys.apply(y);
  const Vector expect = quadratic_rhs(r.ode, r.ode.u_in);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(Ay[i], expect[i], 1e-13);
}

TEST(Invariants, LinearProblemIsBlockDiagonal) {
  FisherKppProblem p;
  p.b = 0.0;
  const auto sys = build_carleman(discretize(p, 3), 3);
  const auto A = assemble(sys);
  for (const auto& t : A.triplets()) EXPECT_EQ(sys.block_of_row(t.row), sys.block_of_row(t.col));
}

}  // namespace
}  // namespace carleman
