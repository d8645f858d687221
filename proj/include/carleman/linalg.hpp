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

// Minimal dense/sparse kernel: storage, products, Kronecker operations,
// LU with partial pivoting and matrix/vector norms.

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "carleman/error.hpp"

namespace carleman {

using Vector = std::vector<double>;

/// Size guard for constructed matrices; d = O(n^N) grows fast.
struct Limits {
  std::size_t max_dimension = 100000;
};

inline void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw PreconditionError(std::string(what) + ": non-finite entry");
  }
}

// ---------------------------------------------------------------------------
// vectors

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> v) {
  // scaled accumulation, avoids overflow for large entries
  double scale = 0.0, ssq = 1.0;
  for (double x : v) {
    if (x == 0.0) continue;
    const double ax = std::abs(x);
    if (scale < ax) {
      ssq = 1.0 + ssq * (scale / ax) * (scale / ax);
      scale = ax;
    } else {
      ssq += (ax / scale) * (ax / scale);
    }
  }
  return scale * std::sqrt(ssq);
}

inline Vector scaled(std::span<const double> v, double s) {
  Vector out(v.begin(), v.end());
  for (double& x : out) x *= s;
  return out;
}

/// out += s * v
inline void axpy(double s, std::span<const double> v, std::span<double> out) {
  if (v.size() != out.size()) throw DimensionError("axpy: length mismatch");
  for (std::size_t i = 0; i < v.size(); ++i) out[i] += s * v[i];
}

inline Vector subtract(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("subtract: length mismatch");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

/// Kronecker product of two vectors, index i_u * v.size() + i_v.
inline Vector kron_vec(std::span<const double> u, std::span<const double> v) {
  Vector out(u.size() * v.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) out[i * v.size() + j] = u[i] * v[j];
  return out;
}

// ---------------------------------------------------------------------------
// dense

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, Vector entries)
      : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (data_.size() != rows_ * cols_) throw DimensionError("DenseMatrix: entries.size() != rows*cols");
    check_finite(data_, "DenseMatrix");
  }
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw DimensionError("DenseMatrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
    check_finite(data_, "DenseMatrix");
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static DenseMatrix diagonal(std::span<const double> d) {
    DenseMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  Vector column(std::size_t j) const {
    Vector c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  const Vector& data() const { return data_; }
  Vector& data() { return data_; }

  DenseMatrix transpose() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  Vector data_;
};

inline Vector matvec(const DenseMatrix& m, std::span<const double> v) {
  if (m.cols() != v.size()) throw DimensionError("matvec: dimension mismatch");
  Vector out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * v[j];
    out[i] = s;
  }
  return out;
}

inline Vector matvec_transposed(const DenseMatrix& m, std::span<const double> v) {
  if (m.rows() != v.size()) throw DimensionError("matvec_transposed: dimension mismatch");
  Vector out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (v[i] == 0.0) continue;
    const auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j] * v[i];
  }
  return out;
}

inline DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("multiply: dimension mismatch");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ci = c.row(i);
    const auto ai = a.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = ai[k];
      if (aik == 0.0) continue;
      const auto bk = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

inline DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t ia = 0; ia < a.rows(); ++ia)
    for (std::size_t ja = 0; ja < a.cols(); ++ja) {
      const double x = a(ia, ja);
      if (x == 0.0) continue;
      for (std::size_t ib = 0; ib < b.rows(); ++ib)
        for (std::size_t jb = 0; jb < b.cols(); ++jb)
          out(ia * b.rows() + ib, ja * b.cols() + jb) = x * b(ib, jb);
    }
  return out;
}

inline double frobenius_norm(const DenseMatrix& m) { return l2_norm(m.data()); }

// ---------------------------------------------------------------------------
// sparse

struct Triplet {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

/// Canonical sorted triplets (row-major, unique, nonzero) plus a compressed
/// row view built once at construction. Immutable.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets,
               const Limits& limits = {})
      : rows_(rows), cols_(cols) {
    if (rows > limits.max_dimension || cols > limits.max_dimension)
      throw CapacityError("SparseMatrix: dimension " + std::to_string(std::max(rows, cols)) +
                          " exceeds cap " + std::to_string(limits.max_dimension));
    for (const auto& t : triplets) {
      if (t.row >= rows || t.col >= cols) throw DimensionError("SparseMatrix: index out of range");
      if (!std::isfinite(t.value)) throw PreconditionError("SparseMatrix: non-finite value");
    }
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& x, const Triplet& y) {
      return x.row != y.row ? x.row < y.row : x.col < y.col;
    });
    triplets_.reserve(triplets.size());
    for (const auto& t : triplets) {
      if (!triplets_.empty() && triplets_.back().row == t.row && triplets_.back().col == t.col)
        triplets_.back().value += t.value;
      else
        triplets_.push_back(t);
    }
    std::erase_if(triplets_, [](const Triplet& t) { return t.value == 0.0; });
    build_rows();
  }

  static SparseMatrix identity(std::size_t n, const Limits& limits = {}) {
    std::vector<Triplet> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = {i, i, 1.0};
    return SparseMatrix(n, n, std::move(t), limits);
  }
  static SparseMatrix diagonal(std::span<const double> d) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < d.size(); ++i) t.push_back({i, i, d[i]});
    return SparseMatrix(d.size(), d.size(), std::move(t));
  }
  static SparseMatrix zero(std::size_t rows, std::size_t cols) { return SparseMatrix(rows, cols, {}); }
  static SparseMatrix from_dense(const DenseMatrix& m) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j)
        if (m(i, j) != 0.0) t.push_back({i, j, m(i, j)});
    return SparseMatrix(m.rows(), m.cols(), std::move(t));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return triplets_.size(); }
  const std::vector<Triplet>& triplets() const { return triplets_; }

  /// Triplets of row i, contiguous.
  std::span<const Triplet> row(std::size_t i) const {
    return {triplets_.data() + row_start_[i], row_start_[i + 1] - row_start_[i]};
  }

  double at(std::size_t i, std::size_t j) const {
    for (const auto& t : row(i))
      if (t.col == j) return t.value;
    return 0.0;
  }

  std::size_t max_row_nnz() const {
    std::size_t m = 0;
    for (std::size_t i = 0; i < rows_; ++i) m = std::max(m, row_start_[i + 1] - row_start_[i]);
    return m;
  }

  DenseMatrix to_dense() const {
    DenseMatrix d(rows_, cols_);
    for (const auto& t : triplets_) d(t.row, t.col) = t.value;
    return d;
  }

  SparseMatrix transpose() const {
    std::vector<Triplet> t;
    t.reserve(triplets_.size());
    for (const auto& x : triplets_) t.push_back({x.col, x.row, x.value});
    return SparseMatrix(cols_, rows_, std::move(t));
  }

  SparseMatrix scaled(double s) const {
    std::vector<Triplet> t = triplets_;
    for (auto& x : t) x.value *= s;
    return SparseMatrix(rows_, cols_, std::move(t));
  }

  bool symmetric() const {
    if (rows_ != cols_) return false;
    for (const auto& t : triplets_)
      if (at(t.col, t.row) != t.value) return false;
    return true;
  }

 private:
  void build_rows() {
    row_start_.assign(rows_ + 1, 0);
    for (const auto& t : triplets_) ++row_start_[t.row + 1];
    std::partial_sum(row_start_.begin(), row_start_.end(), row_start_.begin());
  }

  std::size_t rows_ = 0, cols_ = 0;
  std::vector<Triplet> triplets_;
  std::vector<std::size_t> row_start_ = {0};
};

inline SparseMatrix add(const SparseMatrix& a, const SparseMatrix& b, const Limits& limits = {}) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("add: shape mismatch");
  std::vector<Triplet> t = a.triplets();
  t.insert(t.end(), b.triplets().begin(), b.triplets().end());
  return SparseMatrix(a.rows(), a.cols(), std::move(t), limits);
}

/// Kronecker product; entry (i_a*b.rows+i_b, j_a*b.cols+j_b) = a[i_a,j_a]*b[i_b,j_b].
inline SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b, const Limits& limits = {}) {
  const std::size_t rows = a.rows() * b.rows();
  const std::size_t cols = a.cols() * b.cols();
  if (rows > limits.max_dimension || cols > limits.max_dimension)
    throw CapacityError("kron: result dimension " + std::to_string(std::max(rows, cols)) +
                        " exceeds cap " + std::to_string(limits.max_dimension));
  std::vector<Triplet> t;
  t.reserve(a.nnz() * b.nnz());
  for (const auto& x : a.triplets())
    for (const auto& y : b.triplets())
      t.push_back({x.row * b.rows() + y.row, x.col * b.cols() + y.col, x.value * y.value});
  return SparseMatrix(rows, cols, std::move(t), limits);
}

inline void matvec_into(const SparseMatrix& m, std::span<const double> v, std::span<double> out) {
  if (m.cols() != v.size() || m.rows() != out.size()) throw DimensionError("matvec: dimension mismatch");
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (const auto& t : m.row(i)) s += t.value * v[t.col];
    out[i] = s;
  }
}

inline Vector matvec(const SparseMatrix& m, std::span<const double> v) {
  Vector out(m.rows(), 0.0);
  matvec_into(m, v, out);
  return out;
}

inline Vector matvec_transposed(const SparseMatrix& m, std::span<const double> v) {
  if (m.rows() != v.size()) throw DimensionError("matvec_transposed: dimension mismatch");
  Vector out(m.cols(), 0.0);
  for (const auto& t : m.triplets()) out[t.col] += t.value * v[t.row];
  return out;
}

inline double frobenius_norm(const SparseMatrix& m) {
  Vector v;
  v.reserve(m.nnz());
  for (const auto& t : m.triplets()) v.push_back(t.value);
  return l2_norm(v);
}

// ---------------------------------------------------------------------------
// LU with partial pivoting

/// PA = LU, packed in place. A pivot with |p| < 1e-12 * ||A||_inf marks the
/// matrix singular; `solve` refuses singular factors, `determinant` does not.
class LuDecomposition {
 public:
  static constexpr double kPivotTolerance = 1e-12;

  explicit LuDecomposition(DenseMatrix m) : lu_(std::move(m)) {
    if (!lu_.square()) throw DimensionError("LU: matrix not square");
    const std::size_t n = lu_.rows();
    perm_.resize(n);
    std::iota(perm_.begin(), perm_.end(), 0);
    double row_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (double x : lu_.row(i)) s += std::abs(x);
      row_norm = std::max(row_norm, s);
    }
    const double tol = kPivotTolerance * row_norm;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t p = k;
      double best = std::abs(lu_(k, k));
      for (std::size_t i = k + 1; i < n; ++i)
        if (std::abs(lu_(i, k)) > best) best = std::abs(lu_(i, k)), p = i;
      if (p != k) {
        std::swap_ranges(lu_.row(k).begin(), lu_.row(k).end(), lu_.row(p).begin());
        std::swap(perm_[k], perm_[p]);
        sign_ = -sign_;
      }
      const double pivot = lu_(k, k);
      if (std::abs(pivot) <= tol || row_norm == 0.0) {
        if (!singular_) singular_pivot_ = k;
        singular_ = true;
        if (pivot == 0.0) continue;
      }
      for (std::size_t i = k + 1; i < n; ++i) {
        const double f = lu_(i, k) / pivot;
        lu_(i, k) = f;
        if (f == 0.0) continue;
        auto ri = lu_.row(i);
        const auto rk = lu_.row(k);
        for (std::size_t j = k + 1; j < n; ++j) ri[j] -= f * rk[j];
      }
    }
  }

  std::size_t size() const { return lu_.rows(); }
  bool singular() const { return singular_; }
  std::size_t singular_pivot() const { return singular_pivot_; }

  double pivot(std::size_t k) const { return lu_(k, k); }

  Vector solve(std::span<const double> b) const {
    const std::size_t n = size();
    if (b.size() != n) throw DimensionError("lu_solve: rhs length mismatch");
    if (singular_)
      throw SingularMatrixError("lu_solve: pivot " + std::to_string(singular_pivot_) +
                                " below singularity tolerance");
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = lu_.row(i);
      double s = x[i];
      for (std::size_t j = 0; j < i; ++j) s -= r[j] * x[j];
      x[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
      const auto r = lu_.row(i);
      double s = x[i];
      for (std::size_t j = i + 1; j < n; ++j) s -= r[j] * x[j];
      x[i] = s / r[i];
    }
    return x;
  }

  double determinant() const {
    double d = sign_;
    for (std::size_t k = 0; k < size(); ++k) d *= lu_(k, k);
    return d;
  }

  /// log|det|; -inf for an exactly zero pivot.
  double log_abs_determinant() const {
    double s = 0.0;
    for (std::size_t k = 0; k < size(); ++k) s += std::log(std::abs(lu_(k, k)));
    return s;
  }

 private:
  DenseMatrix lu_;
  std::vector<std::size_t> perm_;
  double sign_ = 1.0;
  bool singular_ = false;
  std::size_t singular_pivot_ = 0;
};

inline Vector lu_solve(const DenseMatrix& m, std::span<const double> b) {
  return LuDecomposition(m).solve(b);
}

inline double lu_determinant(const DenseMatrix& m) { return LuDecomposition(m).determinant(); }

inline DenseMatrix inverse(const DenseMatrix& m) {
  const LuDecomposition lu(m);
  const std::size_t n = m.rows();
  DenseMatrix inv(n, n);
  Vector e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    const Vector c = lu.solve(e);
    e[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = c[i];
  }
  return inv;
}

// ---------------------------------------------------------------------------
// spectral norm

struct SpectralNorm {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Power iteration on M^T M given callables for M and M^T.
template <typename Apply, typename ApplyT>
  requires std::invocable<Apply&, const Vector&> && std::invocable<ApplyT&, const Vector&>
SpectralNorm spectral_norm(Apply&& apply, ApplyT&& apply_t, std::size_t dim, double rtol = 1e-8,
                           int max_iterations = 10000) {
  SpectralNorm out;
  if (dim == 0) {
    out.converged = true;
    return out;
  }
  Vector v(dim);
  for (std::size_t i = 0; i < dim; ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i % 7);
  double nv = l2_norm(v);
  for (double& x : v) x /= nv;
  double sigma2 = 0.0;
  for (int it = 1; it <= max_iterations; ++it) {
    Vector w = apply_t(apply(v));
    const double next = l2_norm(w);
    out.iterations = it;
    if (next == 0.0) {
      out.value = 0.0;
      out.converged = true;
      return out;
    }
    for (std::size_t i = 0; i < dim; ++i) v[i] = w[i] / next;
    if (std::abs(next - sigma2) <= rtol * next) {
      sigma2 = next;
      out.converged = true;
      break;
    }
    sigma2 = next;
  }
  out.value = std::sqrt(sigma2);
  return out;
}

inline SpectralNorm spectral_norm(const DenseMatrix& m, double rtol = 1e-8, int max_iterations = 10000) {
  return spectral_norm([&](const Vector& x) { return matvec(m, x); },
                       [&](const Vector& y) { return matvec_transposed(m, y); }, m.cols(), rtol,
                       max_iterations);
}

inline SpectralNorm spectral_norm(const SparseMatrix& m, double rtol = 1e-8, int max_iterations = 10000) {
  return spectral_norm([&](const Vector& x) { return matvec(m, x); },
                       [&](const Vector& y) { return matvec_transposed(m, y); }, m.cols(), rtol,
                       max_iterations);
}

}  // namespace carleman
