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

// Truncated Carleman embedding y = [u, u⊗u, ..., u^{⊗N}], dy/dt = A y.
//
// A is block upper triangular. Block row j (1-based) holds the Kronecker sum
// A_j^j of F1 on the diagonal and, for a degree-M monomial F_M, the block
// A_{j+M-1}^j of F_M at block column j+M-1 (scaled by gamma). M = 2 gives
// the usual bidiagonal quadratic case.

#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "carleman/linalg.hpp"
#include "carleman/pde.hpp"

namespace carleman {

/// base^exp with a cap; throws CapacityError when exceeded.
inline std::size_t checked_pow(std::size_t base, std::size_t exp, const Limits& limits = {}) {
  std::size_t r = 1;
  for (std::size_t k = 0; k < exp; ++k) {
    if (base != 0 && r > limits.max_dimension / base)
      throw CapacityError("dimension " + std::to_string(base) + "^" + std::to_string(exp) +
                          " exceeds cap " + std::to_string(limits.max_dimension));
    r *= base;
  }
  return r;
}

/// d = n + n^2 + ... + n^N = (n^{N+1} - n)/(n - 1); N for n = 1.
inline std::size_t carleman_dimension(std::size_t n, std::size_t N, const Limits& limits = {}) {
  if (n == 1) return N;
  std::size_t d = 0;
  for (std::size_t j = 1; j <= N; ++j) {
    d += checked_pow(n, j, limits);
    if (d > limits.max_dimension)
      throw CapacityError("carleman_dimension: d exceeds cap " + std::to_string(limits.max_dimension));
  }
  return d;
}

/// Σ_{i=1}^{j} I^{⊗(i-1)} ⊗ F ⊗ I^{⊗(j-i)} for F of shape n x n^M.
inline SparseMatrix kron_sum(const SparseMatrix& F, std::size_t j, std::size_t n,
                             const Limits& limits = {}) {
  if (j == 0) throw PreconditionError("kron_sum: j must be >= 1");
  const std::size_t rows = checked_pow(n, j - 1, limits) * F.rows();
  const std::size_t cols = checked_pow(n, j - 1, limits) * F.cols();
  if (rows > limits.max_dimension || cols > limits.max_dimension)
    throw CapacityError("kron_sum: block dimension exceeds cap " + std::to_string(limits.max_dimension));
  std::vector<Triplet> t;
  t.reserve(j * checked_pow(n, j - 1, limits) * F.nnz());
  for (std::size_t i = 1; i <= j; ++i) {
    const std::size_t left = checked_pow(n, i - 1, limits);
    const std::size_t right = checked_pow(n, j - i, limits);
    for (std::size_t p = 0; p < left; ++p)
      for (const auto& f : F.triplets()) {
        const std::size_t r0 = (p * F.rows() + f.row) * right;
        const std::size_t c0 = (p * F.cols() + f.col) * right;
        for (std::size_t q = 0; q < right; ++q) t.push_back({r0 + q, c0 + q, f.value});
      }
  }
  return SparseMatrix(rows, cols, std::move(t), limits);
}

inline SparseMatrix build_diag_block(const SparseMatrix& F1, std::size_t j, const Limits& limits = {}) {
  return kron_sum(F1, j, F1.rows(), limits);
}

inline SparseMatrix build_super_block(const SparseMatrix& F2, std::size_t j, const Limits& limits = {}) {
  return kron_sum(F2, j, F2.rows(), limits);
}

struct CarlemanVector {
  std::vector<Vector> blocks;

  Vector flatten() const {
    Vector y;
    for (const auto& b : blocks) y.insert(y.end(), b.begin(), b.end());
    return y;
  }
};

class CarlemanSystem {
 public:
  std::size_t n = 0;
  std::size_t N = 0;
  std::size_t M = 2;  // degree of the nonlinear monomial
  std::size_t d = 0;
  double gamma = 1.0;
  std::vector<std::size_t> sizes;    // n^j
  std::vector<std::size_t> offsets;  // cumulative, offsets[0] = 0
  std::vector<SparseMatrix> diag_blocks;
  /// super_blocks[j-1] = A_{j+M-1}^j (unscaled) for j + M - 1 <= N.
  std::vector<SparseMatrix> super_blocks;

  /// 0-based block column of the off-diagonal block in 0-based block row r.
  std::size_t super_column(std::size_t r) const { return r + M - 1; }

  /// y' = A y, applied block by block.
  Vector apply(std::span<const double> y) const {
    if (y.size() != d) throw DimensionError("CarlemanSystem::apply: length mismatch");
    Vector out(d, 0.0);
    for (std::size_t r = 0; r < N; ++r) {
      std::span<double> o(out.data() + offsets[r], sizes[r]);
      matvec_into(diag_blocks[r], y.subspan(offsets[r], sizes[r]), o);
      if (r < super_blocks.size()) {
        const std::size_t c = super_column(r);
        const auto yc = y.subspan(offsets[c], sizes[c]);
        const SparseMatrix& S = super_blocks[r];
        for (std::size_t i = 0; i < S.rows(); ++i) {
          double s = 0.0;
          for (const auto& t : S.row(i)) s += t.value * yc[t.col];
          o[i] += gamma * s;
        }
      }
    }
    return out;
  }

  CarlemanVector split(std::span<const double> y) const {
    if (y.size() != d) throw DimensionError("CarlemanSystem::split: length mismatch");
    CarlemanVector v;
    for (std::size_t j = 0; j < N; ++j)
      v.blocks.emplace_back(y.begin() + offsets[j], y.begin() + offsets[j] + sizes[j]);
    return v;
  }

  std::span<const double> block(std::span<const double> y, std::size_t j) const {
    return y.subspan(offsets[j], sizes[j]);
  }

  /// 0-based block containing global index `i`.
  std::size_t block_of_row(std::size_t i) const {
    for (std::size_t j = N; j-- > 0;)
      if (i >= offsets[j]) return j;
    return 0;
  }
};

/// Carleman system for du/dt = F1 u + F_M u^{⊗M}, truncated at order N.
inline CarlemanSystem build_general_degree(const SparseMatrix& F1, const SparseMatrix& FM, std::size_t M,
                                           std::size_t N, double gamma = 1.0, const Limits& limits = {}) {
  const std::size_t n = F1.rows();
  if (N == 0) throw PreconditionError("Carleman truncation order N must be >= 1");
  if (M < 2) throw PreconditionError("build_general_degree: M must be >= 2");
  if (F1.cols() != n) throw DimensionError("build_general_degree: F1 not square");
  if (FM.rows() != n || FM.cols() != checked_pow(n, M, limits))
    throw DimensionError("build_general_degree: F_M must be n x n^M");
  CarlemanSystem s;
  s.n = n;
  s.N = N;
  s.M = M;
  s.gamma = gamma;
  s.d = carleman_dimension(n, N, limits);
  std::size_t off = 0;
  for (std::size_t j = 1; j <= N; ++j) {
    s.sizes.push_back(checked_pow(n, j, limits));
    s.offsets.push_back(off);
    off += s.sizes.back();
    s.diag_blocks.push_back(build_diag_block(F1, j, limits));
  }
  for (std::size_t j = 1; j + M - 1 <= N; ++j) s.super_blocks.push_back(kron_sum(FM, j, n, limits));
  return s;
}

inline CarlemanSystem build_carleman(const QuadraticOde& ode, std::size_t N, double gamma = 1.0,
                                     const Limits& limits = {}) {
  return build_general_degree(ode.F1, ode.F2, 2, N, gamma, limits);
}

/// One nonlinear term of a polynomial right-hand side.
struct MonomialTerm {
  std::size_t degree = 2;
  SparseMatrix F;
};

/// Only F1 plus a single monomial is supported; mixed-degree right-hand sides
/// lose the block structure the diagonalization relies on.
inline CarlemanSystem build_polynomial(const SparseMatrix& F1, const std::vector<MonomialTerm>& terms,
                                       std::size_t N, double gamma = 1.0, const Limits& limits = {}) {
  if (terms.size() != 1)
    throw UnsupportedError(
        "mixed-degree Carleman matrices are unsupported (open problem): expected exactly one "
        "nonlinear term, got " +
        std::to_string(terms.size()));
  return build_general_degree(F1, terms.front().F, terms.front().degree, N, gamma, limits);
}

/// Full sparse A with the off-diagonal blocks multiplied by gamma.
inline SparseMatrix assemble(const CarlemanSystem& s, double gamma, const Limits& limits = {}) {
  std::vector<Triplet> t;
  for (std::size_t r = 0; r < s.N; ++r) {
    for (const auto& x : s.diag_blocks[r].triplets())
      t.push_back({s.offsets[r] + x.row, s.offsets[r] + x.col, x.value});
    if (r < s.super_blocks.size()) {
      const std::size_t c = s.super_column(r);
      for (const auto& x : s.super_blocks[r].triplets())
        t.push_back({s.offsets[r] + x.row, s.offsets[c] + x.col, gamma * x.value});
    }
  }
  return SparseMatrix(s.d, s.d, std::move(t), limits);
}

inline SparseMatrix assemble(const CarlemanSystem& s, const Limits& limits = {}) {
  return assemble(s, s.gamma, limits);
}

/// y_in = [u, u⊗u, ..., u^{⊗N}].
inline CarlemanVector lift_initial(std::span<const double> u, std::size_t N) {
  CarlemanVector v;
  if (N == 0) return v;
  v.blocks.emplace_back(u.begin(), u.end());
  for (std::size_t j = 2; j <= N; ++j) v.blocks.push_back(kron_vec(v.blocks.back(), u));
  return v;
}

/// N (||F1|| + ||F2||) with ||F1|| = 4D(n+1)^2 + a and ||F2|| = |b|.
inline double norm_bound(std::size_t n, std::size_t N, double D, double a, double b) {
  return static_cast<double>(N) * (norm_f1_closed_form(n, D, a) + std::abs(b));
}

}  // namespace carleman
