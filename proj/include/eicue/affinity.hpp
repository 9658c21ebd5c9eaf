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

#include <cmath>
#include <cstdlib>

#include "eicue/error.hpp"
#include "eicue/grid.hpp"
#include "eicue/linalg.hpp"

namespace eicue {

struct AffinityConfig {
  double sigma_c = 1.0;       // RBF bandwidth on [0, 1] RGB
  std::size_t radius = 2;     // Chebyshev support in patches
  bool clamp_negative = true; // zero negative semantic affinities
  double ridge = 1e-6;        // added to the adjacency diagonal before the Laplacian

  void validate() const {
    if (!(sigma_c > 0.0) || !std::isfinite(sigma_c))
      throw InvalidInput("AffinityConfig: sigma_c must be > 0");
    if (!(ridge >= 0.0)) throw InvalidInput("AffinityConfig: ridge must be >= 0");
  }
};

// A_color(p, q) = exp(-||x(p) - x(q)||_2 / (2 sigma_c^2)) for patches within
// `radius` (Chebyshev) of each other, zero elsewhere. The exponent uses the
// plain Euclidean distance, not its square.
inline SymMatrix color_affinity(const PatchImage& img, const AffinityConfig& cfg) {
  cfg.validate();
  const std::size_t h = img.h(), w = img.w(), n = img.n();
  const auto r = static_cast<std::ptrdiff_t>(cfg.radius);
  const double denom = 2.0 * cfg.sigma_c * cfg.sigma_c;
  Matrix a(n, n);
  for (std::size_t p = 0; p < n; ++p) {
    const auto pc = patch_coord(p, w);
    const auto xp = img.rgb().row(p);
    const auto r0 = std::max<std::ptrdiff_t>(0, std::ptrdiff_t(pc.row) - r);
    const auto r1 = std::min<std::ptrdiff_t>(std::ptrdiff_t(h) - 1, std::ptrdiff_t(pc.row) + r);
    const auto c0 = std::max<std::ptrdiff_t>(0, std::ptrdiff_t(pc.col) - r);
    const auto c1 = std::min<std::ptrdiff_t>(std::ptrdiff_t(w) - 1, std::ptrdiff_t(pc.col) + r);
    for (auto rr = r0; rr <= r1; ++rr) {
      for (auto cc = c0; cc <= c1; ++cc) {
        const std::size_t q = patch_index(std::size_t(rr), std::size_t(cc), w);
        if (q < p) {
          a(p, q) = a(q, p);
          continue;
        }
        const auto xq = img.rgb().row(q);
        double d2 = 0.0;
        for (int ch = 0; ch < 3; ++ch) d2 += (xp[ch] - xq[ch]) * (xp[ch] - xq[ch]);
        a(p, q) = q == p ? 1.0 : std::exp(-std::sqrt(d2) / denom);
      }
    }
  }
  return SymMatrix(std::move(a));
}

// A_seg = S S^T over the flattened N x D_S features, optionally clamped at 0.
inline SymMatrix semantic_affinity(const FeatureGrid& s, const AffinityConfig& cfg) {
  const Matrix& f = s.data();
  const std::size_t n = f.rows();
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double v = dot(f.row(i), f.row(j));
      if (cfg.clamp_negative && v < 0.0) v = 0.0;
      a(i, j) = v;
      a(j, i) = v;
    }
  }
  return SymMatrix(std::move(a));
}

inline SymMatrix adjacency(const SymMatrix& a_color, const SymMatrix& a_seg) {
  if (a_color.n() != a_seg.n()) throw InvalidInput("adjacency: matrix orders differ");
  Matrix a = a_color.matrix();
  a += a_seg.matrix();
  return SymMatrix(std::move(a));
}

}  // namespace eicue
