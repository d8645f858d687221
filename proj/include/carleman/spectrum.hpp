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

// Carleman spectrum and the iterative block diagonalization A = V Λ V^{-1}.
//
// Block j of A has the Kronecker-sum spectrum {λ_{i1} + ... + λ_{ij}} with
// eigenvectors w_{i1} ⊗ ... ⊗ w_{ij}; everything here uses that lexicographic
// Kronecker order. V is block upper triangular with diagonal blocks W^{⊗j},
// which are never materialized.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "carleman/embedding.hpp"
#include "carleman/linalg.hpp"
#include "carleman/pde.hpp"

namespace carleman {

// ---------------------------------------------------------------------------
// Kronecker powers

/// (M^{⊗j}) v, or (M^T)^{⊗j} v, by one mode product per tensor factor.
inline Vector apply_kron_power(const DenseMatrix& m, std::size_t j, std::span<const double> v,
                               bool transpose = false) {
  const std::size_t n = m.rows();
  if (!m.square()) throw DimensionError("apply_kron_power: matrix not square");
  std::size_t total = 1;
  for (std::size_t k = 0; k < j; ++k) total *= n;
  if (v.size() != total) throw DimensionError("apply_kron_power: length mismatch");
  Vector cur(v.begin(), v.end()), next(total);
  std::size_t stride = total;
  for (std::size_t mode = 0; mode < j; ++mode) {
    stride /= n;
    const std::size_t outer = total / (stride * n);
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t o = 0; o < outer; ++o) {
      const std::size_t base = o * n * stride;
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < n; ++i) {
          const double a = transpose ? m(i, r) : m(r, i);
          if (a == 0.0) continue;
          const double* src = cur.data() + base + i * stride;
          double* dst = next.data() + base + r * stride;
          for (std::size_t s = 0; s < stride; ++s) dst[s] += a * src[s];
        }
    }
    std::swap(cur, next);
  }
  return cur;
}

/// Column `col` of M^{⊗j}: the Kronecker product of the matching columns.
inline Vector kron_power_column(const DenseMatrix& m, std::size_t j, std::size_t col) {
  const std::size_t n = m.rows();
  std::vector<std::size_t> idx(j);
  for (std::size_t k = j; k-- > 0;) {
    idx[k] = col % n;
    col /= n;
  }
  Vector out{1.0};
  for (std::size_t k = 0; k < j; ++k) out = kron_vec(out, m.column(idx[k]));
  return out;
}

// ---------------------------------------------------------------------------
// enumeration

/// Kronecker-ordered spectrum of the j-th diagonal block: entry (i1..ij) is
/// λ_{i1} + ... + λ_{ij}.
inline Vector block_eigenvalues(std::span<const double> lambda, std::size_t j,
                                std::size_t cap = 1000000) {
  if (j == 0) throw PreconditionError("block_eigenvalues: j must be >= 1");
  Vector cur{0.0};
  for (std::size_t k = 0; k < j; ++k) {
    if (cur.size() * lambda.size() > cap)
      throw CapacityError("block_eigenvalues: more than " + std::to_string(cap) + " eigenvalues");
    Vector next;
    next.reserve(cur.size() * lambda.size());
    for (double c : cur)
      for (double l : lambda) next.push_back(c + l);
    cur = std::move(next);
  }
  return cur;
}

struct EigenEntry {
  std::vector<unsigned> m;  // m_k = multiplicity of λ_k in the sum
  double value = 0.0;
  std::size_t block = 0;  // 1-based, equals Σ m_k
};

struct EigenEnumeration {
  std::vector<EigenEntry> entries;

  Vector values() const {
    Vector v;
    v.reserve(entries.size());
    for (const auto& e : entries) v.push_back(e.value);
    return v;
  }
};

/// All d eigenvalues of the order-N Carleman matrix, with multiplicity, in
/// the same order as the columns of V.
inline EigenEnumeration enumerate_eigenvalues(std::span<const double> lambda, std::size_t N,
                                              std::size_t cap = 1000000) {
  const std::size_t n = lambda.size();
  std::size_t count = 0, p = 1;
  for (std::size_t j = 1; j <= N; ++j) {
    if (n != 0 && p > cap / n) throw CapacityError("enumerate_eigenvalues: count exceeds cap");
    p *= n;
    count += p;
    if (count > cap) throw CapacityError("enumerate_eigenvalues: count exceeds cap " + std::to_string(cap));
  }
  EigenEnumeration out;
  out.entries.reserve(count);
  for (std::size_t j = 1; j <= N; ++j) {
    std::vector<std::size_t> idx(j, 0);
    while (true) {
      EigenEntry e;
      e.m.assign(n, 0);
      e.block = j;
      for (std::size_t k : idx) {
        ++e.m[k];
        e.value += lambda[k];
      }
      out.entries.push_back(std::move(e));
      std::size_t pos = j;
      while (pos > 0 && ++idx[pos - 1] == n) idx[--pos] = 0;
      if (pos == 0) break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// no-resonance

struct NearMiss {
  std::size_t i = 0;            // 1-based index into λ(F1)
  std::vector<unsigned> m;      // colliding combination
  double gap = 0.0;             // |λ_i - Σ m_k λ_k|
};

struct NoResonanceReport {
  bool holds = true;
  double tolerance = 0.0;       // relative
  double scale = 0.0;           // max |λ|
  double min_gap = std::numeric_limits<double>::infinity();
  double min_gap_relative = std::numeric_limits<double>::infinity();
  /// Smallest distance between eigenvalues of different diagonal blocks.
  double block_gap = std::numeric_limits<double>::infinity();
  std::vector<NearMiss> near_misses;  // gap below the warning band
  std::size_t combinations = 0;
};

/// Tests λ_i ≠ Σ m_k λ_k for all multi-indices with 2 <= Σ m_k <= N.
/// Gaps below `tolerance * max|λ|` are collisions; gaps below
/// `warn_tolerance * max|λ|` are kept as near misses.
inline NoResonanceReport check_no_resonance(std::span<const double> lambda, std::size_t N,
                                            double tolerance = 1e-9, double warn_tolerance = 1e-6,
                                            std::size_t cap = 1000000) {
  if (!(tolerance > 0.0)) throw PreconditionError("check_no_resonance: tolerance must be > 0");
  const std::size_t n = lambda.size();
  NoResonanceReport rep;
  rep.tolerance = tolerance;
  for (double l : lambda) rep.scale = std::max(rep.scale, std::abs(l));
  const double scale = rep.scale > 0.0 ? rep.scale : 1.0;
  const double band = std::max(tolerance, warn_tolerance) * scale;

  // values of every multiset per block order, for the block gap
  std::vector<std::pair<double, std::size_t>> tagged;
  for (std::size_t i = 0; i < n; ++i) tagged.push_back({lambda[i], 1});

  for (std::size_t j = 2; j <= N; ++j) {
    std::vector<std::size_t> idx(j, 0);  // non-decreasing: one multiset each
    while (true) {
      if (++rep.combinations > cap) throw CapacityError("check_no_resonance: combination count exceeds cap");
      double s = 0.0;
      for (std::size_t k : idx) s += lambda[k];
      tagged.push_back({s, j});
      for (std::size_t i = 0; i < n; ++i) {
        const double gap = std::abs(lambda[i] - s);
        rep.min_gap = std::min(rep.min_gap, gap);
        if (gap <= band) {
          NearMiss nm;
          nm.i = i + 1;
          nm.m.assign(n, 0);
          for (std::size_t k : idx) ++nm.m[k];
          nm.gap = gap;
          rep.near_misses.push_back(std::move(nm));
        }
        if (gap <= tolerance * scale) rep.holds = false;
      }
      std::size_t pos = j;
      while (pos > 0 && idx[pos - 1] == n - 1) --pos;
      if (pos == 0) break;
      const std::size_t v = idx[pos - 1] + 1;
      for (std::size_t q = pos - 1; q < j; ++q) idx[q] = v;
    }
  }
  rep.min_gap_relative = rep.min_gap / scale;

  // nearest cross-block pair is adjacent in sorted order
  std::sort(tagged.begin(), tagged.end());
  for (std::size_t k = 1; k < tagged.size(); ++k)
    if (tagged[k].second != tagged[k - 1].second)
      rep.block_gap = std::min(rep.block_gap, tagged[k].first - tagged[k - 1].first);
  return rep;
}

struct Extremes {
  double max = 0.0;
  double min = 0.0;
};

/// Extreme Carleman eigenvalues in the dissipative regime: the largest is
/// λ_1(F1) and the smallest is N λ_n(F1).
inline Extremes extremal_eigenvalues(std::size_t n, std::size_t N, double D, double a) {
  if (N == 0) throw PreconditionError("extremal_eigenvalues: N must be >= 1");
  const Vector lam = f1_spectrum(n, D, a);
  if (!(lam.front() < 0.0))
    throw PreconditionError("extremal_eigenvalues: requires all eigenvalues of F1 negative");
  return {lam.front(), static_cast<double>(N) * lam.back()};
}

// ---------------------------------------------------------------------------
// padding

/// x solving (P11 - μ I) x = -P12 g, so [x; g] is an eigenvector of
/// [[P11, P12], [0, P22]] with eigenvalue μ whenever P22 g = μ g.
inline Vector pad_eigenvector(const DenseMatrix& P11, const DenseMatrix& P12, std::span<const double> g,
                              double mu) {
  if (!P11.square() || P12.rows() != P11.rows() || P12.cols() != g.size())
    throw DimensionError("pad_eigenvector: shape mismatch");
  DenseMatrix shifted = P11;
  for (std::size_t i = 0; i < shifted.rows(); ++i) shifted(i, i) -= mu;
  Vector rhs = matvec(P12, g);
  for (double& x : rhs) x = -x;
  const LuDecomposition lu(std::move(shifted));
  if (lu.singular())
    throw ResonanceError("pad_eigenvector: mu = " + std::to_string(mu) +
                         " is an eigenvalue of the leading block (no-resonance violated)");
  return lu.solve(rhs);
}

/// Same solve with P11 = G diag(lambda) G^{-1}:
/// (P11 - μ)^{-1} = G diag(1/(λ_k - μ)) G^{-1}.
inline Vector pad_eigenvector_spectral(std::span<const double> lambda, const DenseMatrix& G,
                                       const DenseMatrix& G_inv, const DenseMatrix& P12,
                                       std::span<const double> g, double mu,
                                       double tolerance = 1e-12) {
  Vector rhs = matvec(P12, g);
  Vector c = matvec(G_inv, rhs);
  double scale = std::abs(mu);
  for (double l : lambda) scale = std::max(scale, std::abs(l));
  for (std::size_t k = 0; k < c.size(); ++k) {
    const double gap = lambda[k] - mu;
    if (std::abs(gap) <= tolerance * std::max(scale, 1.0))
      throw ResonanceError("pad_eigenvector_spectral: mu = " + std::to_string(mu) +
                           " coincides with a leading eigenvalue");
    c[k] = -c[k] / gap;
  }
  return matvec(G, c);
}

// ---------------------------------------------------------------------------
// diagonalization

enum class PaddingRoute { kAuto, kDenseLu, kSpectral };

struct DiagonalizeOptions {
  PaddingRoute route = PaddingRoute::kAuto;
  /// kAuto uses dense LU while the leading principal block has at most this
  /// many rows, the spectral route beyond.
  std::size_t lu_threshold = 128;
  double resonance_tolerance = 1e-9;   // relative to max |Λ|
  double residual_tolerance = 1e-8;    // relative to ||A||_F
  bool verify = true;                  // compute residuals and condition numbers
  double power_rtol = 1e-8;
  int power_max_iterations = 10000;
};

/// A = V Λ V^{-1} with V, V^{-1} block upper triangular.
class Diagonalization {
 public:
  std::size_t n = 0, N = 0, M = 2, d = 0;
  std::vector<std::size_t> sizes, offsets;
  Vector lambda;  // d values, block by block, Kronecker order
  DenseMatrix W, W_inv;
  /// X[c][k], k < c: block (k, c) of V. Y[c][k]: block (k, c) of V^{-1}.
  std::vector<std::vector<DenseMatrix>> X, Y;

  double residual = std::numeric_limits<double>::quiet_NaN();          // ||AV - VΛ||_F / ||A||_F
  double residual_absolute = std::numeric_limits<double>::quiet_NaN();  // ||AV - VΛ||_F
  double inverse_residual = std::numeric_limits<double>::quiet_NaN();   // ||V V^{-1} - I||_F
  std::size_t worst_column = 0;
  double norm_A_F = 0.0;
  double kappa_direct = std::numeric_limits<double>::quiet_NaN();
  bool kappa_converged = false;
  double log_kappa_guggenheimer = std::numeric_limits<double>::quiet_NaN();
  double kappa_guggenheimer = std::numeric_limits<double>::quiet_NaN();  // +inf when exp overflows
  double log_abs_det_V = std::numeric_limits<double>::quiet_NaN();
  double norm_V_F = 0.0;

  Vector apply_V(std::span<const double> y) const { return apply_upper(y, W, X, false); }
  Vector apply_V_inv(std::span<const double> y) const { return apply_upper(y, W_inv, Y, false); }
  Vector apply_V_transposed(std::span<const double> y) const { return apply_upper(y, W, X, true); }
  Vector apply_V_inv_transposed(std::span<const double> y) const { return apply_upper(y, W_inv, Y, true); }

  /// Column `col` of V.
  Vector column_V(std::size_t col) const {
    const std::size_t c = block_of(col);
    const std::size_t g = col - offsets[c];
    Vector v(d, 0.0);
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t i = 0; i < sizes[k]; ++i) v[offsets[k] + i] = X[c][k](i, g);
    const Vector w = kron_power_column(W, c + 1, g);
    std::copy(w.begin(), w.end(), v.begin() + static_cast<std::ptrdiff_t>(offsets[c]));
    return v;
  }

  DenseMatrix dense_V() const { return dense(false); }
  DenseMatrix dense_V_inv() const { return dense(true); }

  std::size_t block_of(std::size_t index) const {
    for (std::size_t c = N; c-- > 0;)
      if (index >= offsets[c]) return c;
    return 0;
  }

 private:
  Vector apply_upper(std::span<const double> y, const DenseMatrix& base,
                     const std::vector<std::vector<DenseMatrix>>& off, bool transpose) const {
    if (y.size() != d) throw DimensionError("Diagonalization: vector length mismatch");
    Vector out(d, 0.0);
    for (std::size_t c = 0; c < N; ++c) {
      const Vector diag = apply_kron_power(base, c + 1, y.subspan(offsets[c], sizes[c]), transpose);
      std::copy(diag.begin(), diag.end(), out.begin() + static_cast<std::ptrdiff_t>(offsets[c]));
    }
    for (std::size_t c = 1; c < N; ++c)
      for (std::size_t k = 0; k < c; ++k) {
        const DenseMatrix& B = off[c][k];
        if (!transpose) {
          const Vector t = matvec(B, y.subspan(offsets[c], sizes[c]));
          axpy(1.0, t, std::span<double>(out.data() + offsets[k], sizes[k]));
        } else {
          const Vector t = matvec_transposed(B, y.subspan(offsets[k], sizes[k]));
          axpy(1.0, t, std::span<double>(out.data() + offsets[c], sizes[c]));
        }
      }
    return out;
  }

  DenseMatrix dense(bool inverse) const {
    DenseMatrix m(d, d);
    Vector e(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      e[j] = 1.0;
      const Vector col = inverse ? apply_V_inv(e) : apply_V(e);
      e[j] = 0.0;
      for (std::size_t i = 0; i < d; ++i) m(i, j) = col[i];
    }
    return m;
  }
};

namespace detail {

/// Rows/cols [0, size) of the assembled matrix as a dense array.
inline DenseMatrix leading_block(const SparseMatrix& A, std::size_t size) {
  DenseMatrix m(size, size);
  for (std::size_t i = 0; i < size; ++i)
    for (const auto& t : A.row(i))
      if (t.col < size) m(i, t.col) = t.value;
  return m;
}

}  // namespace detail

/// Fills V^{-1} from V by the block-triangular inverse
///   [[P, Q], [0, S]]^{-1} = [[P^{-1}, -P^{-1} Q S^{-1}], [0, S^{-1}]],
/// sweeping block columns left to right.
inline void invert_V(Diagonalization& dg) {
  dg.Y.assign(dg.N, {});
  for (std::size_t c = 1; c < dg.N; ++c) {
    const std::size_t lead = dg.offsets[c];
    const std::size_t cols = dg.sizes[c];
    // Z = Q S^{-1}, row by row: row_i(Z) = (S^{-T}) row_i(Q) with S^{-1} = (W^{-1})^{⊗(c+1)}
    DenseMatrix Z(lead, cols);
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t i = 0; i < dg.sizes[k]; ++i) {
        Vector row(cols);
        for (std::size_t g = 0; g < cols; ++g) row[g] = dg.X[c][k](i, g);
        const Vector zr = apply_kron_power(dg.W_inv, c + 1, row, true);
        for (std::size_t g = 0; g < cols; ++g) Z(dg.offsets[k] + i, g) = zr[g];
      }
    // -P^{-1} Z using the already inverted leading block columns
    dg.Y[c].resize(c);
    for (std::size_t k = 0; k < c; ++k) dg.Y[c][k] = DenseMatrix(dg.sizes[k], cols);
    for (std::size_t g = 0; g < cols; ++g) {
      Vector z(lead);
      for (std::size_t i = 0; i < lead; ++i) z[i] = Z(i, g);
      // block back-substitution with the leading part of V^{-1}
      Vector out(lead, 0.0);
      for (std::size_t b = 0; b < c; ++b) {
        const Vector diag =
            apply_kron_power(dg.W_inv, b + 1, std::span<const double>(z).subspan(dg.offsets[b], dg.sizes[b]));
        for (std::size_t i = 0; i < dg.sizes[b]; ++i) out[dg.offsets[b] + i] += diag[i];
        for (std::size_t k = 0; k < b; ++k) {
          const Vector t = matvec(dg.Y[b][k], std::span<const double>(z).subspan(dg.offsets[b], dg.sizes[b]));
          for (std::size_t i = 0; i < dg.sizes[k]; ++i) out[dg.offsets[k] + i] += t[i];
        }
      }
      for (std::size_t k = 0; k < c; ++k)
        for (std::size_t i = 0; i < dg.sizes[k]; ++i) dg.Y[c][k](i, g) = -out[dg.offsets[k] + i];
    }
  }
}

struct ConditionNumbers {
  double kappa_direct = 0.0;
  bool converged = false;
  double log_kappa_guggenheimer = 0.0;
  double kappa_guggenheimer = 0.0;
  double log_abs_det_V = 0.0;
  double norm_V_F = 0.0;
};

/// κ = ||V|| ||V^{-1}|| by power iteration, and the determinant bound
/// 2/|det V| (||V||_F / sqrt(d))^d evaluated in log space.
inline ConditionNumbers condition_numbers(const Diagonalization& dg, double rtol = 1e-8,
                                          int max_iterations = 10000) {
  ConditionNumbers cn;
  const auto sv = spectral_norm([&](const Vector& x) { return dg.apply_V(x); },
                                [&](const Vector& y) { return dg.apply_V_transposed(y); }, dg.d, rtol,
                                max_iterations);
  const auto si = spectral_norm([&](const Vector& x) { return dg.apply_V_inv(x); },
                                [&](const Vector& y) { return dg.apply_V_inv_transposed(y); }, dg.d, rtol,
                                max_iterations);
  cn.kappa_direct = sv.value * si.value;
  cn.converged = sv.converged && si.converged;

  // det W^{⊗j} = det(W)^{j n^{j-1}}; det V is the product over diagonal blocks
  const double log_det_W = LuDecomposition(dg.W).log_abs_determinant();
  double log_det = 0.0, ssq = 0.0;
  const double wf2 = std::pow(frobenius_norm(dg.W), 2.0);
  double npow = 1.0;
  for (std::size_t j = 1; j <= dg.N; ++j) {
    log_det += static_cast<double>(j) * npow * log_det_W;
    npow *= static_cast<double>(dg.n);
    ssq += std::pow(wf2, static_cast<double>(j));
  }
  for (std::size_t c = 1; c < dg.N; ++c)
    for (std::size_t k = 0; k < c; ++k) ssq += std::pow(frobenius_norm(dg.X[c][k]), 2.0);
  cn.norm_V_F = std::sqrt(ssq);
  cn.log_abs_det_V = log_det;
  const double dd = static_cast<double>(dg.d);
  cn.log_kappa_guggenheimer = std::log(2.0) - log_det + dd * (std::log(cn.norm_V_F) - 0.5 * std::log(dd));
  cn.kappa_guggenheimer = cn.log_kappa_guggenheimer > std::log(std::numeric_limits<double>::max())
                              ? std::numeric_limits<double>::infinity()
                              : std::exp(cn.log_kappa_guggenheimer);
  return cn;
}

struct DiagonalizationResiduals {
  double absolute = 0.0;
  double relative = 0.0;
  std::size_t worst_column = 0;
  double inverse = 0.0;
};

/// ||AV - VΛ||_F (column by column) and ||V V^{-1} - I||_F.
inline DiagonalizationResiduals diagonalization_residuals(const CarlemanSystem& sys, const Diagonalization& dg) {
  DiagonalizationResiduals r;
  double ssq = 0.0, worst = -1.0;
  for (std::size_t col = 0; col < dg.d; ++col) {
    const Vector v = dg.column_V(col);
    Vector av = sys.apply(v);
    axpy(-dg.lambda[col], v, av);
    const double e = l2_norm(av);
    ssq += e * e;
    if (e > worst) worst = e, r.worst_column = col;
  }
  r.absolute = std::sqrt(ssq);
  const double normA = frobenius_norm(assemble(sys));
  r.relative = normA > 0.0 ? r.absolute / normA : r.absolute;
  ssq = 0.0;
  Vector e(dg.d, 0.0);
  for (std::size_t col = 0; col < dg.d; ++col) {
    e[col] = 1.0;
    Vector x = dg.apply_V(dg.apply_V_inv(e));
    x[col] -= 1.0;
    e[col] = 0.0;
    const double nx = l2_norm(x);
    ssq += nx * nx;
  }
  r.inverse = std::sqrt(ssq);
  return r;
}

/// Eigenvectors of A built block column by block column: for each
/// eigenvector g of the new diagonal block with eigenvalue μ, the entries
/// above it solve (A_kk - μ I) x_k = -Σ_{l>k} A_kl x_l by back-substitution.
inline Diagonalization iterative_diagonalize(const CarlemanSystem& sys, const Eigensystem& es,
                                             const DiagonalizeOptions& opt = {}) {
  if (es.lambda.size() != sys.n || es.W.rows() != sys.n || es.W_inv.rows() != sys.n)
    throw DimensionError("iterative_diagonalize: eigensystem does not match n");
  Diagonalization dg;
  dg.n = sys.n;
  dg.N = sys.N;
  dg.M = sys.M;
  dg.d = sys.d;
  dg.sizes = sys.sizes;
  dg.offsets = sys.offsets;
  dg.W = es.W;
  dg.W_inv = es.W_inv;

  std::vector<Vector> block_lambda;
  for (std::size_t j = 1; j <= sys.N; ++j) {
    block_lambda.push_back(block_eigenvalues(es.lambda, j));
    dg.lambda.insert(dg.lambda.end(), block_lambda.back().begin(), block_lambda.back().end());
  }
  double scale = 0.0;
  for (double l : dg.lambda) scale = std::max(scale, std::abs(l));
  const double res_tol = opt.resonance_tolerance * std::max(scale, 1.0);

  std::optional<SparseMatrix> A;
  dg.X.assign(sys.N, {});
  for (std::size_t c = 1; c < sys.N; ++c) {
    const std::size_t lead = sys.offsets[c];
    const std::size_t cols = sys.sizes[c];
    dg.X[c].resize(c);
    for (std::size_t k = 0; k < c; ++k) dg.X[c][k] = DenseMatrix(sys.sizes[k], cols);

    const bool use_lu = opt.route == PaddingRoute::kDenseLu ||
                        (opt.route == PaddingRoute::kAuto && lead <= opt.lu_threshold);
    DenseMatrix A_lead;
    if (use_lu) {
      if (!A) A = assemble(sys);
      A_lead = detail::leading_block(*A, lead);
    }
    std::map<double, LuDecomposition> lu_cache;

    for (std::size_t g = 0; g < cols; ++g) {
      const double mu = block_lambda[c][g];
      for (std::size_t k = 0; k < c; ++k)
        for (double l : block_lambda[k])
          if (std::abs(l - mu) <= res_tol)
            throw ResonanceError("iterative_diagonalize: eigenvalue " + std::to_string(mu) + " of block " +
                                 std::to_string(c + 1) + " collides with block " + std::to_string(k + 1) +
                                 " (no-resonance violated)");
      const Vector gv = kron_power_column(es.W, c + 1, g);

      if (use_lu) {
        Vector rhs(lead, 0.0);
        if (c + 1 >= sys.M) {
          const std::size_t k = c + 1 - sys.M;  // only row block reaching column c
          const Vector t = matvec(sys.super_blocks[k], gv);
          for (std::size_t i = 0; i < t.size(); ++i) rhs[sys.offsets[k] + i] = -sys.gamma * t[i];
        }
        auto it = lu_cache.find(mu);
        if (it == lu_cache.end()) {
          DenseMatrix shifted = A_lead;
          for (std::size_t i = 0; i < lead; ++i) shifted(i, i) -= mu;
          it = lu_cache.emplace(mu, LuDecomposition(std::move(shifted))).first;
          if (it->second.singular())
            throw ResonanceError("iterative_diagonalize: shifted leading block singular at mu = " +
                                 std::to_string(mu));
        }
        const Vector x = it->second.solve(rhs);
        for (std::size_t k = 0; k < c; ++k)
          for (std::size_t i = 0; i < sys.sizes[k]; ++i) dg.X[c][k](i, g) = x[sys.offsets[k] + i];
      } else {
        std::vector<Vector> xs(c);
        for (std::size_t k = c; k-- > 0;) {
          const std::size_t l = k + sys.M - 1;
          Vector rhs(sys.sizes[k], 0.0);
          if (l <= c) {
            const Vector& src = (l == c) ? gv : xs[l];
            rhs = matvec(sys.super_blocks[k], src);
            for (double& v : rhs) v *= -sys.gamma;
          }
          Vector coef = apply_kron_power(es.W_inv, k + 1, rhs);
          for (std::size_t i = 0; i < coef.size(); ++i) coef[i] /= (block_lambda[k][i] - mu);
          xs[k] = apply_kron_power(es.W, k + 1, coef);
          for (std::size_t i = 0; i < sys.sizes[k]; ++i) dg.X[c][k](i, g) = xs[k][i];
        }
      }
    }
  }

  invert_V(dg);

  if (opt.verify) {
    const auto r = diagonalization_residuals(sys, dg);
    dg.residual_absolute = r.absolute;
    dg.residual = r.relative;
    dg.worst_column = r.worst_column;
    dg.inverse_residual = r.inverse;
    dg.norm_A_F = frobenius_norm(A ? *A : assemble(sys));
    const auto cn = condition_numbers(dg, opt.power_rtol, opt.power_max_iterations);
    dg.kappa_direct = cn.kappa_direct;
    dg.kappa_converged = cn.converged;
    dg.kappa_guggenheimer = cn.kappa_guggenheimer;
    dg.log_kappa_guggenheimer = cn.log_kappa_guggenheimer;
    dg.log_abs_det_V = cn.log_abs_det_V;
    dg.norm_V_F = cn.norm_V_F;
    if (!(dg.residual <= opt.residual_tolerance))
      throw NumericalError("iterative_diagonalize: residual " + std::to_string(dg.residual) +
                           " exceeds tolerance; worst column " + std::to_string(dg.worst_column + 1));
  }
  return dg;
}

inline Diagonalization iterative_diagonalize(const CarlemanSystem& sys, const QuadraticOde& ode,
                                             const DiagonalizeOptions& opt = {}) {
  return iterative_diagonalize(sys, f1_eigensystem(ode), opt);
}

/// Eigensystem of a diagonal F1: W = I.
inline Eigensystem diagonal_eigensystem(std::span<const double> lambda) {
  Eigensystem es;
  es.lambda.assign(lambda.begin(), lambda.end());
  es.W = DenseMatrix::identity(lambda.size());
  es.W_inv = es.W;
  return es;
}

}  // namespace carleman
