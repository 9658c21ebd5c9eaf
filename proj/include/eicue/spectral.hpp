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

// Graph Laplacians of the patch adjacency and what is derived from their
// eigenvectors: eigenfeatures, eigengap-based k selection and matting.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "eicue/error.hpp"
#include "eicue/grid.hpp"
#include "eicue/linalg.hpp"

namespace eicue {

inline constexpr double kMinDegree = 1e-12;

struct Laplacian {
  std::vector<double> degree;  // D(i, i) = sum_j A(i, j)
  SymMatrix l_sym;             // D^-1/2 (D - A) D^-1/2
};

// Unnormalized L = D - A.
inline SymMatrix unnormalized_laplacian(const SymMatrix& a) {
  const std::size_t n = a.n();
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      deg += a(i, j);
      l(i, j) = -a(i, j);
    }
    l(i, i) += deg;
  }
  return SymMatrix(std::move(l));
}

inline Laplacian build_laplacian(const SymMatrix& a) {
  const std::size_t n = a.n();
  Laplacian out;
  out.degree.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += a(i, j);
    if (!(deg > kMinDegree)) {
      throw DegenerateGraph(i, "build_laplacian: patch " + std::to_string(i) +
                                   " has degree " + std::to_string(deg) + " (isolated)");
    }
    out.degree[i] = deg;
  }
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(out.degree[i]);
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double v = -a(i, j) * inv_sqrt[i] * inv_sqrt[j];
      if (i == j) v = 1.0 - a(i, i) / out.degree[i];
      l(i, j) = v;
      l(j, i) = v;
    }
  }
  out.l_sym = SymMatrix(std::move(l));
  return out;
}

// Adds eps * I to the adjacency.
inline SymMatrix with_ridge(const SymMatrix& a, double eps) {
  if (eps == 0.0) return a;
  Matrix m = a.matrix();
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) += eps;
  return SymMatrix(std::move(m));
}

// First k eigenvectors as an N x k matrix; row i is the eigenfeature of patch i.
inline Matrix smallest_k(const EigenBasis& basis, std::size_t k) {
  const std::size_t n = basis.values.size();
  if (k < 1 || k > n || k > basis.vectors.cols())
    throw InvalidInput("smallest_k: k=" + std::to_string(k) + " outside [1, " +
                       std::to_string(n) + "]");
  Matrix v(basis.vectors.rows(), k);
  for (std::size_t i = 0; i < v.rows(); ++i)
    for (std::size_t j = 0; j < k; ++j) v(i, j) = basis.vectors(i, j);
  return v;
}

// `basis` holds every eigenvalue but only the first k eigenvectors.
struct LaplacianBundle {
  std::vector<double> degree;
  SymMatrix l_sym;
  EigenBasis basis;
  std::size_t k = 0;
  Matrix v_hat;
};

inline LaplacianBundle spectral_bundle(const SymMatrix& a, std::size_t k) {
  Laplacian lap = build_laplacian(a);
  if (k < 1 || k > a.n())
    throw InvalidInput("spectral_bundle: k=" + std::to_string(k) + " outside [1, " +
                       std::to_string(a.n()) + "]");
  EigenBasis basis = sym_eigen_smallest(lap.l_sym, k);
  Matrix v_hat = smallest_k(basis, k);
  return {std::move(lap.degree), std::move(lap.l_sym), std::move(basis), k, std::move(v_hat)};
}

struct EigengapChoice {
  std::size_t k;
  double gap;
};

// k = argmax_{1 <= j <= k_max} values[j] - values[j-1]; the smaller k wins ties.
inline EigengapChoice eigengap_select(const std::vector<double>& values, std::size_t k_max) {
  if (values.size() < 2) throw InvalidInput("eigengap_select: need at least two eigenvalues");
  const std::size_t last = std::min(std::max<std::size_t>(k_max, 1), values.size() - 1);
  EigengapChoice best{1, values[1] - values[0]};
  for (std::size_t j = 2; j <= last; ++j) {
    const double gap = values[j] - values[j - 1];
    if (gap > best.gap) best = {j, gap};
  }
  return best;
}

// Otsu's threshold on values in [0, 1] using a 256-bin histogram. Returns the
// upper edge of the last background bin.
inline double otsu_threshold(const std::vector<double>& unit_values) {
  constexpr int kBins = 256;
  std::array<double, kBins> hist{};
  for (double v : unit_values) {
    const int b = std::clamp(static_cast<int>(v * kBins), 0, kBins - 1);
    hist[b] += 1.0;
  }
  const double total = static_cast<double>(unit_values.size());
  double sum_all = 0.0;
  for (int b = 0; b < kBins; ++b) sum_all += (b + 0.5) * hist[b];
  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int best_bin = 0;
  for (int b = 0; b < kBins - 1; ++b) {
    w0 += hist[b];
    sum0 += (b + 0.5) * hist[b];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_bin = b;
    }
  }
  return (best_bin + 1) / static_cast<double>(kBins);
}

struct MatteOptions {
  enum class Threshold { kOtsu, kFixed };
  Threshold mode = Threshold::kOtsu;
  double fixed = 0.5;
  bool flip = false;  // invert the foreground choice
};

// Binary matte from one eigenvector: min-max normalize, threshold, and call
// the smaller side foreground (label 1). On equal sizes the above-threshold
// side is foreground.
inline SegmentMap matte(std::span<const double> vec, std::size_t h, std::size_t w,
                        const MatteOptions& opt = {}) {
  if (vec.size() != h * w) throw InvalidInput("matte: vector length != h*w");
  if (vec.empty()) throw InvalidInput("matte: empty vector");
  const auto [lo_it, hi_it] = std::minmax_element(vec.begin(), vec.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi - lo > 1e-12)) throw DegenerateInput("matte: eigenvector is constant");
  std::vector<double> unit(vec.size());
  for (std::size_t i = 0; i < vec.size(); ++i) unit[i] = (vec[i] - lo) / (hi - lo);
  const double t = opt.mode == MatteOptions::Threshold::kOtsu ? otsu_threshold(unit) : opt.fixed;

  std::vector<int> above(unit.size());
  std::size_t n_above = 0;
  for (std::size_t i = 0; i < unit.size(); ++i) {
    above[i] = unit[i] > t ? 1 : 0;
    n_above += static_cast<std::size_t>(above[i]);
  }
  const bool above_is_fg = n_above <= unit.size() - n_above;
  const bool fg_value = above_is_fg != opt.flip;
  std::vector<int> labels(unit.size());
  for (std::size_t i = 0; i < unit.size(); ++i) labels[i] = (above[i] == 1) == fg_value ? 1 : 0;
  return SegmentMap(h, w, std::move(labels));
}

// Column 1: the first eigenvector past the near-constant null vector.
inline std::vector<double> matting_vector(const EigenBasis& basis) {
  if (basis.values.size() < 2) throw DegenerateInput("matting_vector: graph has a single patch");
  return basis.vectors.column(1);
}

}  // namespace eicue
