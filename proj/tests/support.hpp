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

// Shared fixtures and independent oracles for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "eicue/affinity.hpp"
#include "eicue/distill.hpp"
#include "eicue/eigen_cluster.hpp"
#include "eicue/evaluator.hpp"
#include "eicue/heads.hpp"
#include "eicue/linalg.hpp"
#include "eicue/objnce.hpp"
#include "eicue/rng.hpp"
#include "eicue/spectral.hpp"

namespace eicue::test {

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

inline SymMatrix random_symmetric(std::size_t n, Rng& rng) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) m(i, j) = m(j, i) = rng.normal();
  return SymMatrix(std::move(m));
}

// Dense, connected, nonnegative, symmetric; optionally with zero entries.
inline SymMatrix random_adjacency(std::size_t n, Rng& rng, double zero_fraction = 0.0) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double v = rng.uniform() < zero_fraction ? 0.0 : rng.uniform(0.01, 1.0);
      m(i, j) = m(j, i) = v;
    }
  // A path keeps the graph connected whatever was zeroed.
  for (std::size_t i = 0; i + 1 < n; ++i) m(i, i + 1) = m(i + 1, i) = std::max(m(i, i + 1), 0.1);
  return SymMatrix(std::move(m));
}

inline double reconstruction_error(const SymMatrix& m, const EigenBasis& b) {
  const std::size_t n = m.n();
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < b.values.size(); ++k)
        s += b.vectors(i, k) * b.values[k] * b.vectors(j, k);
      err += (s - m(i, j)) * (s - m(i, j));
      ref += m(i, j) * m(i, j);
    }
  return std::sqrt(err) / std::max(std::sqrt(ref), 1e-300);
}

// max |v_a . v_b - delta_ab| over column pairs.
inline double orthogonality_error(const Matrix& v) {
  double worst = 0.0;
  for (std::size_t a = 0; a < v.cols(); ++a)
    for (std::size_t b = a; b < v.cols(); ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < v.rows(); ++i) s += v(i, a) * v(i, b);
      worst = std::max(worst, std::abs(s - (a == b ? 1.0 : 0.0)));
    }
  return worst;
}

// ---------------------------------------------------------------------------
// Finite differences

// Relative error ||g - g_fd|| / max(||g||, ||g_fd||, floor) of central
// differences of `f` over the scalars behind `params`.
inline double fd_relative_error(const std::vector<double*>& params,
                                const std::vector<double>& analytic,
                                const std::function<double()>& f, double h = 1e-6,
                                double floor = 1e-10) {
  double diff = 0.0, na = 0.0, nf = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params[i];
    const double keep = *p;
    *p = keep + h;
    const double up = f();
    *p = keep - h;
    const double down = f();
    *p = keep;
    const double fd = (up - down) / (2.0 * h);
    diff += (fd - analytic[i]) * (fd - analytic[i]);
    na += analytic[i] * analytic[i];
    nf += fd * fd;
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nf), floor});
}

inline std::vector<double*> pointers(Matrix& m) {
  std::vector<double*> out;
  for (double& v : m.values()) out.push_back(&v);
  return out;
}

inline std::vector<double> flat(const Matrix& m) {
  return {m.values().begin(), m.values().end()};
}

inline std::vector<double*> head_pointers(HeadParams& p) {
  std::vector<double*> out;
  for (auto& t : p.tensors())
    for (double& v : t.value->values()) out.push_back(&v);
  return out;
}

inline std::vector<double> head_grads(HeadParams& p) {
  std::vector<double> out;
  for (auto& t : p.tensors())
    for (double v : t.grad->values()) out.push_back(v);
  return out;
}

// A random segment map over `objects` labels with every label present.
inline SegmentMap random_map(std::size_t h, std::size_t w, std::size_t objects, Rng& rng) {
  std::vector<int> labels(h * w);
  for (std::size_t i = 0; i < labels.size(); ++i)
    labels[i] = i < objects ? int(i) : int(rng.index(objects));
  rng.shuffle(labels);
  return SegmentMap(h, w, std::move(labels));
}

// ---------------------------------------------------------------------------
// Oracles

// Smallest index among minimizers of sum_i ||z(m) - z(i)||, scanning every
// candidate and recomputing every distance.
inline std::size_t brute_medoid(const Matrix& z, std::vector<std::size_t> indices) {
  std::sort(indices.begin(), indices.end());
  std::size_t best = indices.front();
  double best_sum = std::numeric_limits<double>::infinity();
  for (std::size_t m : indices) {
    double s = 0.0;
    for (std::size_t i : indices) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < z.cols(); ++c) d2 += (z(m, c) - z(i, c)) * (z(m, c) - z(i, c));
      s += std::sqrt(d2);
    }
    if (s < best_sum) {
      best_sum = s;
      best = m;
    }
  }
  return best;
}

// Lexicographically first permutation maximizing sum_g cm(g, perm[g]).
inline std::vector<std::size_t> brute_hungarian(const ConfusionMatrix& cm) {
  std::vector<std::size_t> perm(cm.c), best;
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::uint64_t best_gain = 0;
  bool first = true;
  do {
    std::uint64_t g = 0;
    for (std::size_t i = 0; i < cm.c; ++i) g += cm.at(i, perm[i]);
    if (first || g > best_gain) {
      best_gain = g;
      best = perm;
      first = false;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Row means of K K^T.
inline std::vector<double> quadratic_obj_weights(const Matrix& k) {
  const std::size_t n = k.rows();
  std::vector<double> w(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < k.cols(); ++c) s += k(i, c) * k(j, c);
      w[i] += s;
    }
    w[i] /= double(n);
  }
  return w;
}

inline std::vector<int> row_argmax(const Matrix& p) {
  std::vector<int> out(p.rows());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < p.cols(); ++c)
      if (p(i, c) > p(i, best)) best = c;
    out[i] = int(best);
  }
  return out;
}

// Block affinity: `blocks` equal groups, within-block weight `in`, across
// `out`, with multiplicative jitter.
inline SymMatrix block_affinity(std::size_t n, std::size_t blocks, double in, double out,
                                Rng& rng, double jitter = 0.05) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const bool same = i * blocks / n == j * blocks / n;
      m(i, j) = m(j, i) = (same ? in : out) * (1.0 + rng.uniform(-jitter, jitter));
    }
  return SymMatrix(std::move(m));
}

// ---------------------------------------------------------------------------
// Files

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Fresh directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("eicue_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace eicue::test
