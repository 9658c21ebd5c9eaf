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

// Differentiable cosine K-means over eigenfeatures. Scores P = norm(V^) C,
// clustering loss L_eig = -(1/N) sum_i sum_c softmax(P)_ic P_ic, and the
// EiCue map argmax_c log_softmax(P)_ic.

#include <cmath>
#include <limits>
#include <vector>

#include "eicue/error.hpp"
#include "eicue/grid.hpp"
#include "eicue/linalg.hpp"
#include "eicue/rng.hpp"

namespace eicue {

// k x C learnable centers; columns are kept at unit length.
struct ClusterCenters {
  Matrix weights;
  Matrix grad;

  ClusterCenters() = default;
  explicit ClusterCenters(Matrix w) : weights(std::move(w)), grad(weights.rows(), weights.cols()) {
    normalize_columns();
  }

  std::size_t k() const noexcept { return weights.rows(); }
  std::size_t classes() const noexcept { return weights.cols(); }

  void normalize_columns() {
    for (std::size_t c = 0; c < weights.cols(); ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < weights.rows(); ++r) s += weights(r, c) * weights(r, c);
      const double nrm = std::sqrt(s);
      if (nrm < kZeroNorm) continue;
      for (std::size_t r = 0; r < weights.rows(); ++r) weights(r, c) /= nrm;
    }
  }
};

// P = (row-normalized v_hat) * centers. Zero eigenfeature rows give zero rows.
inline Matrix assignment_scores(const Matrix& v_hat, const ClusterCenters& centers) {
  if (v_hat.cols() != centers.k())
    throw InvalidInput("assignment_scores: eigenfeature dim != center dim");
  return matmul(normalize_rows(v_hat).unit, centers.weights);
}

inline LossAndGrad eig_loss(const Matrix& p) {
  const Matrix psi = row_softmax(p);
  const double n = static_cast<double>(p.rows());
  LossAndGrad out{0.0, Matrix(p.rows(), p.cols())};
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const double f = dot(psi.row(i), p.row(i));
    out.value -= f / n;
    // d/dP_a sum_c psi_c P_c = psi_a (1 + P_a - f)
    for (std::size_t a = 0; a < p.cols(); ++a)
      out.grad(i, a) = -psi(i, a) * (1.0 + p(i, a) - f) / n;
  }
  return out;
}

// Log-softmax rows of P.
inline Matrix log_softmax_rows(const Matrix& p) {
  Matrix out(p.rows(), p.cols());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    auto r = p.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (double v : r) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < r.size(); ++c) out(i, c) = r[c] - lse;
  }
  return out;
}

// argmax_c (P_ic - logsumexp_c' P_ic'). Entries that collapse to the same
// log-probability through rounding are separated by their raw score, so the
// result is exactly the row argmax of P with ties to the smallest index.
inline SegmentMap eicue_map(const Matrix& p, std::size_t h, std::size_t w) {
  if (!p.all_finite()) throw InvalidInput("eicue_map: non-finite score");
  if (p.rows() != h * w) throw InvalidInput("eicue_map: score rows != h*w");
  if (p.cols() == 0) throw InvalidInput("eicue_map: no clusters");
  const Matrix lp = log_softmax_rows(p);
  std::vector<int> labels(p.rows());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < p.cols(); ++c) {
      if (lp(i, c) > lp(i, best) || (lp(i, c) == lp(i, best) && p(i, c) > p(i, best))) best = c;
    }
    labels[i] = static_cast<int>(best);
  }
  return SegmentMap(h, w, std::move(labels));
}

// dL/dC = norm(V^)^T dL/dP
inline Matrix centers_gradient(const Matrix& v_hat, const Matrix& grad_p) {
  return matmul_tn(normalize_rows(v_hat).unit, grad_p);
}

// Plain gradient step followed by column renormalization.
inline void centers_step(ClusterCenters& centers, const Matrix& grad_p, const Matrix& v_hat,
                         double lr) {
  const Matrix g = centers_gradient(v_hat, grad_p);
  if (g.rows() != centers.k() || g.cols() != centers.classes())
    throw InvalidInput("centers_step: gradient shape mismatch");
  auto w = centers.weights.values();
  auto gv = g.values();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * gv[i];
  centers.normalize_columns();
}

// k-means++ seeding under cosine distance over row-normalized eigenfeatures.
inline ClusterCenters init_centers_kmeanspp(const std::vector<const Matrix*>& eigenfeatures,
                                            std::size_t classes, Rng& rng) {
  Matrix rows;
  {
    std::size_t total = 0, k = 0;
    for (const auto* m : eigenfeatures) {
      total += m->rows();
      k = m->cols();
    }
    if (total < classes) throw InvalidInput("init_centers_kmeanspp: fewer rows than classes");
    rows = Matrix(total, k);
    std::size_t r = 0;
    for (const auto* m : eigenfeatures) {
      const Matrix u = normalize_rows(*m).unit;
      for (std::size_t i = 0; i < u.rows(); ++i, ++r)
        std::copy(u.row(i).begin(), u.row(i).end(), rows.row(r).begin());
    }
  }
  const std::size_t n = rows.rows(), k = rows.cols();
  Matrix centers(k, classes);
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::size_t pick = static_cast<std::size_t>(rng.index(n));
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t j = 0; j < k; ++j) centers(j, c) = rows(pick, j);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = 1.0 - dot(rows.row(i), rows.row(pick));
      dist[i] = std::min(dist[i], std::max(d, 0.0));
      total += dist[i] * dist[i];
    }
    if (c + 1 == classes) break;
    if (total <= 0.0) {
      pick = static_cast<std::size_t>(rng.index(n));
      continue;
    }
    double u = rng.uniform() * total;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      u -= dist[i] * dist[i];
      if (u < 0.0) {
        pick = i;
        break;
      }
    }
  }
  // A zero row (all-zero eigenfeature) would leave a zero column.
  for (std::size_t c = 0; c < classes; ++c) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += centers(j, c) * centers(j, c);
    if (s < kZeroNorm) centers(c % k, c) = 1.0;
  }
  return ClusterCenters(std::move(centers));
}

}  // namespace eicue
