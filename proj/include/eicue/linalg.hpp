/* Copyright 2026 The eicue Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

// Dense real linear algebra used throughout the toolkit. Everything is
// double precision and row-major.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eicue/error.hpp"

namespace eicue {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw InvalidInput("Matrix: data size " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows_) + "x" +
                         std::to_string(cols_));
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& storage() const { return data_; }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  Matrix& operator+=(const Matrix& o) {
    require_same_shape(o, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  Matrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  bool operator==(const Matrix& o) const = default;

  void require_same_shape(const Matrix& o, const char* op) const {
    if (rows_ != o.rows_ || cols_ != o.cols_)
      throw InvalidInput(std::string(op) + ": shape mismatch");
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double frobenius_norm(const Matrix& m) { return norm2(m.values()); }

// a * b
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw InvalidInput("matmul: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ci = c.row(i);
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      auto bp = b.row(p);
      for (std::size_t j = 0; j < ci.size(); ++j) ci[j] += aip * bp[j];
    }
  }
  return c;
}

// a^T * b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw InvalidInput("matmul_tn: row counts differ");
  Matrix c(a.cols(), b.cols());
  for (std::size_t p = 0; p < a.rows(); ++p) {
    auto ap = a.row(p);
    auto bp = b.row(p);
    for (std::size_t i = 0; i < ap.size(); ++i) {
      const double v = ap[i];
      if (v == 0.0) continue;
      auto ci = c.row(i);
      for (std::size_t j = 0; j < bp.size(); ++j) ci[j] += v * bp[j];
    }
  }
  return c;
}

// a * b^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw InvalidInput("matmul_nt: column counts differ");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(a.row(i), b.row(j));
  return c;
}

// Dense symmetric matrix. Construction checks finiteness and symmetry, then
// stores the exactly symmetric average (M + M^T) / 2.
class SymMatrix {
 public:
  static constexpr double kSymmetryTolerance = 1e-12;

  SymMatrix() = default;
  explicit SymMatrix(Matrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) throw InvalidInput("SymMatrix: matrix is not square");
    if (m_.rows() == 0) throw InvalidInput("SymMatrix: order must be positive");
    if (!m_.all_finite()) throw InvalidInput("SymMatrix: non-finite entry");
    const std::size_t n = m_.rows();
    constexpr std::size_t kTile = 32;
    for (std::size_t i0 = 0; i0 < n; i0 += kTile)
      for (std::size_t j0 = i0; j0 < n; j0 += kTile)
        for (std::size_t i = i0; i < std::min(i0 + kTile, n); ++i)
          for (std::size_t j = std::max(j0, i + 1); j < std::min(j0 + kTile, n); ++j) {
            const double a = m_(i, j), b = m_(j, i);
            const double scale = std::max({1.0, std::abs(a), std::abs(b)});
            if (std::abs(a - b) > kSymmetryTolerance * scale) {
              throw InvalidInput("SymMatrix: asymmetric at (" + std::to_string(i) + "," +
                                 std::to_string(j) + ")");
            }
            const double avg = 0.5 * (a + b);
            m_(i, j) = avg;
            m_(j, i) = avg;
          }
  }

  std::size_t n() const noexcept { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  const Matrix& matrix() const noexcept { return m_; }

 private:
  Matrix m_;
};

struct EigenBasis {
  std::vector<double> values;  // ascending
  Matrix vectors;              // column j pairs with values[j]
};

namespace detail {

struct Reflectors {
  std::vector<std::vector<double>> v;  // v[k] acts on coordinates k+1..n-1
  std::vector<double> beta;            // H_k = I - beta[k] v[k] v[k]^T
};

// Householder reduction of a symmetric matrix to tridiagonal form.
// On return d/e hold the diagonal and super-diagonal (e[i] couples i, i+1);
// A = Q T Q^T with Q = H_0 H_1 ... H_{n-3}.
inline Reflectors householder_reflectors(Matrix a, std::vector<double>& d,
                                         std::vector<double>& e) {
  const std::size_t n = a.rows();
  d.assign(n, 0.0);
  e.assign(n, 0.0);
  Reflectors refl;
  refl.v.resize(n >= 2 ? n - 2 : 0);
  refl.beta.assign(refl.v.size(), 0.0);
  std::vector<double> p, w;

  for (std::size_t k = 0; k + 2 < n; ++k) {
    const std::size_t m = n - k - 1;
    auto x = a.row(k).subspan(k + 1, m);
    double scale = 0.0;
    for (double v : x) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) {
      e[k] = 0.0;
      continue;
    }
    double ss = 0.0;
    for (double v : x) ss += (v / scale) * (v / scale);
    const double norm = scale * std::sqrt(ss);
    const double alpha = x[0] >= 0.0 ? -norm : norm;
    std::vector<double> v(x.begin(), x.end());
    v[0] -= alpha;
    const double vtv = 2.0 * norm * (norm + std::abs(x[0]));
    const double beta = 2.0 / vtv;
    e[k] = alpha;

    // Only the upper triangle of the trailing block is read and updated.
    p.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double* r = a.row(k + 1 + i).data() + (k + 1);
      const double vi = v[i];
      double acc[4] = {r[i] * vi, 0.0, 0.0, 0.0};
      std::size_t j = i + 1;
      for (; j + 4 <= m; j += 4) {
        acc[0] += r[j] * v[j];
        acc[1] += r[j + 1] * v[j + 1];
        acc[2] += r[j + 2] * v[j + 2];
        acc[3] += r[j + 3] * v[j + 3];
      }
      for (; j < m; ++j) acc[0] += r[j] * v[j];
      for (j = i + 1; j < m; ++j) p[j] += r[j] * vi;
      p[i] += (acc[0] + acc[1]) + (acc[2] + acc[3]);
    }
    for (double& x : p) x *= beta;
    const double kappa = 0.5 * beta * dot(p, v);
    w.resize(m);
    for (std::size_t i = 0; i < m; ++i) w[i] = p[i] - kappa * v[i];
    for (std::size_t i = 0; i < m; ++i) {
      double* r = a.row(k + 1 + i).data() + (k + 1);
      const double vi = v[i], wi = w[i];
      for (std::size_t j = i; j < m; ++j) r[j] -= vi * w[j] + wi * v[j];
    }
    a(k, k + 1) = alpha;
    refl.v[k] = std::move(v);
    refl.beta[k] = beta;
  }
  for (std::size_t i = 0; i < n; ++i) d[i] = a(i, i);
  if (n >= 2) e[n - 2] = a(n - 2, n - 1);
  return refl;
}

// As householder_reflectors, also forming qt = Q^T = H_{n-3} ... H_0. The
// product is accumulated by right multiplication so each reflector only
// touches the trailing block.
inline void householder_tridiagonalize(Matrix a, std::vector<double>& d,
                                       std::vector<double>& e, Matrix& qt) {
  const std::size_t n = a.rows();
  const Reflectors refl = householder_reflectors(std::move(a), d, e);
  qt = Matrix::identity(n);
  for (std::size_t kk = refl.v.size(); kk-- > 0;) {
    if (refl.beta[kk] == 0.0) continue;
    const auto& v = refl.v[kk];
    const std::size_t off = kk + 1;
    const std::size_t m = v.size();
    for (std::size_t r = off; r < n; ++r) {
      auto row = qt.row(r).subspan(off, m);
      const double t = refl.beta[kk] * dot(row, v);
      if (t == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) row[j] -= t * v[j];
    }
  }
}

// x <- Q x for Q = H_0 ... H_{n-3}.
inline void apply_q(const Reflectors& refl, std::span<double> x) {
  for (std::size_t kk = refl.v.size(); kk-- > 0;) {
    if (refl.beta[kk] == 0.0) continue;
    const auto& v = refl.v[kk];
    auto tail = x.subspan(kk + 1, v.size());
    const double t = refl.beta[kk] * dot(tail, v);
    for (std::size_t j = 0; j < v.size(); ++j) tail[j] -= t * v[j];
  }
}

// Inverse iteration on the tridiagonal (d, e) for eigenvalue `shift`:
// Gaussian elimination with partial pivoting, tiny pivots replaced by
// `tiny`, a few solves from a fixed start vector with Gram-Schmidt against
// `against` (eigenvectors of nearby eigenvalues).
inline std::vector<double> tridiagonal_inverse_iteration(
    const std::vector<double>& d, const std::vector<double>& e, double shift, double tiny,
    const std::vector<const std::vector<double>*>& against, std::size_t seed_index) {
  const std::size_t n = d.size();
  std::vector<double> u0(n), u1(n, 0.0), u2(n, 0.0), lm(n, 0.0);
  std::vector<char> swp(n, 0);
  u0[0] = d[0] - shift;
  if (n > 1) u1[0] = e[0];
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double sub = e[i];
    const double next0 = d[i + 1] - shift;
    const double next1 = i + 2 < n ? e[i + 1] : 0.0;
    if (std::abs(u0[i]) >= std::abs(sub)) {
      const double m = u0[i] == 0.0 ? 0.0 : sub / u0[i];
      lm[i] = m;
      u0[i + 1] = next0 - m * u1[i];
      u1[i + 1] = next1 - m * u2[i];
    } else {
      const double m = u0[i] / sub;
      const double o1 = u1[i], o2 = u2[i];
      lm[i] = m;
      swp[i] = 1;
      u0[i] = sub;
      u1[i] = next0;
      u2[i] = next1;
      u0[i + 1] = o1 - m * next0;
      u1[i + 1] = o2 - m * next1;
    }
  }
  for (double& v : u0)
    if (std::abs(v) < tiny) v = v < 0.0 ? -tiny : tiny;

  std::vector<double> x(n);
  // Deterministic, generically non-orthogonal start vector.
  for (std::size_t i = 0; i < n; ++i)
    x[i] = 1.0 + 0.5 * std::sin(0.7 * double(i + 1) + 1.3 * double(seed_index + 1));
  auto orthonormalize = [&] {
    for (const auto* q : against) {
      const double p = dot(x, *q);
      for (std::size_t i = 0; i < n; ++i) x[i] -= p * (*q)[i];
    }
    const double nrm = norm2(x);
    if (nrm == 0.0) throw NumericalFailure("inverse iteration: vector collapsed");
    for (double& v : x) v /= nrm;
  };
  orthonormalize();
  for (int it = 0; it < 4; ++it) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (swp[i]) std::swap(x[i], x[i + 1]);
      x[i + 1] -= lm[i] * x[i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double v = x[ii];
      if (ii + 1 < n) v -= u1[ii] * x[ii + 1];
      if (ii + 2 < n) v -= u2[ii] * x[ii + 2];
      x[ii] = v / u0[ii];
    }
    double mx = 0.0;
    for (double v : x) mx = std::max(mx, std::abs(v));
    if (!std::isfinite(mx) || mx == 0.0) throw NumericalFailure("inverse iteration: overflow");
    for (double& v : x) v /= mx;
    orthonormalize();
  }
  return x;
}

// Implicit-shift QL on a symmetric tridiagonal matrix. Rotations are applied
// to the rows of zt, which holds the transposed eigenvector matrix.
inline void tridiagonal_ql(std::vector<double>& d, std::vector<double>& e, Matrix& zt,
                           std::size_t iteration_budget) {
  const std::size_t n = d.size();
  const double eps = std::numeric_limits<double>::epsilon();
  double f = 0.0, tst1 = 0.0;
  std::size_t iterations = 0;
  const std::size_t cols = zt.cols();

  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }
    if (m == n) m = n - 1;
    if (m > l) {
      do {
        if (++iterations > iteration_budget) {
          throw NumericalFailure("sym_eigendecompose: QL iteration did not converge");
        }
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t ii = m; ii-- > l;) {
          const std::size_t i = ii;
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);
          double* zi = zt.row(i).data();
          double* zi1 = zt.row(i + 1).data();
          for (std::size_t k = 0; k < cols; ++k) {
            const double t = zi1[k];
            zi1[k] = s * zi[k] + c * t;
            zi[k] = c * zi[k] - s * t;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] = d[l] + f;
    e[l] = 0.0;
  }
}

}  // namespace detail

// Full symmetric eigendecomposition: Householder tridiagonalization followed
// by implicit-shift QL. Eigenvalues ascend; each eigenvector column is
// sign-fixed so that its largest-magnitude entry is positive.
inline EigenBasis sym_eigendecompose(const SymMatrix& m) {
  const std::size_t n = m.n();
  if (n == 0) throw InvalidInput("sym_eigendecompose: empty matrix");
  if (!m.matrix().all_finite()) throw InvalidInput("sym_eigendecompose: non-finite entry");

  std::vector<double> d, e;
  Matrix zt;
  detail::householder_tridiagonalize(m.matrix(), d, e, zt);
  detail::tridiagonal_ql(d, e, zt, 200 * n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });

  EigenBasis out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto src = zt.row(order[j]);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(src[i]) > std::abs(src[arg])) arg = i;
    const double sign = src[arg] < 0.0 ? -1.0 : 1.0;
    out.values[j] = d[order[j]];
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = sign * src[i];
  }
  return out;
}

// All eigenvalues (ascending) and the eigenvectors of the `k` smallest, as
// an n x k matrix. Eigenvalues come from value-only QL on the tridiagonal
// form, vectors from inverse iteration mapped back through the reflectors;
// sign convention as in sym_eigendecompose.
inline EigenBasis sym_eigen_smallest(const SymMatrix& m, std::size_t k) {
  const std::size_t n = m.n();
  if (n == 0) throw InvalidInput("sym_eigen_smallest: empty matrix");
  if (k == 0 || k > n) throw InvalidInput("sym_eigen_smallest: k must be in [1, n]");
  if (!m.matrix().all_finite()) throw InvalidInput("sym_eigen_smallest: non-finite entry");

  std::vector<double> d, e;
  const detail::Reflectors refl = detail::householder_reflectors(m.matrix(), d, e);
  std::vector<double> vals = d, off = e;
  Matrix none(n, 0);
  detail::tridiagonal_ql(vals, off, none, 200 * n);
  std::sort(vals.begin(), vals.end());

  double tnorm = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    tnorm = std::max(tnorm, std::abs(d[i]) + std::abs(e[i]) + (i ? std::abs(e[i - 1]) : 0.0));
  const double eps = std::numeric_limits<double>::epsilon();
  const double tiny = std::max(eps * tnorm, std::numeric_limits<double>::min());
  const double cluster = 1e-3 * std::max(tnorm, std::numeric_limits<double>::min());

  std::vector<std::vector<double>> tri(k);
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<const std::vector<double>*> near;
    for (std::size_t i = 0; i < j; ++i)
      if (vals[j] - vals[i] <= cluster) near.push_back(&tri[i]);
    tri[j] = detail::tridiagonal_inverse_iteration(d, e, vals[j], tiny, near, j);
  }

  EigenBasis out;
  out.values = std::move(vals);
  out.vectors = Matrix(n, k);
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double>& x = tri[j];
    detail::apply_q(refl, x);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(x[i]) > std::abs(x[arg])) arg = i;
    const double sign = x[arg] < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = sign * x[i];
  }
  return out;
}

// Numerically stable softmax over each row.
inline Matrix row_softmax(const Matrix& m) {
  if (!m.all_finite()) throw InvalidInput("row_softmax: non-finite entry");
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto in = m.row(i);
    auto o = out.row(i);
    if (in.empty()) continue;
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (double& v : o) v /= sum;
  }
  return out;
}

// Scalar objective with its gradient w.r.t. one matrix argument.
struct LossAndGrad {
  double value = 0.0;
  Matrix grad;
};

inline constexpr double kZeroNorm = 1e-12;

// Cosine similarity with the defined-zero convention for near-zero vectors.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("cosine_similarity: length mismatch");
  const double na = norm2(a), nb = norm2(b);
  if (na < kZeroNorm || nb < kZeroNorm) return 0.0;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

struct NormalizedRows {
  Matrix unit;                // rows scaled to unit length (zero rows stay zero)
  std::vector<double> norms;  // original row norms
};

inline NormalizedRows normalize_rows(const Matrix& m) {
  NormalizedRows out{Matrix(m.rows(), m.cols()), std::vector<double>(m.rows())};
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double nrm = norm2(m.row(i));
    out.norms[i] = nrm;
    if (nrm < kZeroNorm) continue;
    auto src = m.row(i);
    auto dst = out.unit.row(i);
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = src[j] / nrm;
  }
  return out;
}

// Back-propagates a gradient on normalized rows to the raw rows:
// dx = (g - (g . u) u) / ||x||. Zero rows receive zero gradient.
inline Matrix normalize_rows_backward(const NormalizedRows& fwd, const Matrix& grad_unit) {
  Matrix dx(grad_unit.rows(), grad_unit.cols());
  for (std::size_t i = 0; i < grad_unit.rows(); ++i) {
    const double nrm = fwd.norms[i];
    if (nrm < kZeroNorm) continue;
    auto g = grad_unit.row(i);
    auto u = fwd.unit.row(i);
    const double gu = dot(g, u);
    auto o = dx.row(i);
    for (std::size_t j = 0; j < g.size(); ++j) o[j] = (g[j] - gu * u[j]) / nrm;
  }
  return dx;
}

}  // namespace eicue
