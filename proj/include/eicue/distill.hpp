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

// Correspondence distillation: cosine correspondence tensors of the frozen
// features K and the learned features S, the adaptive shifts, and the
// bilinear loss L_cd(F, S, b) = -sum (F - b) S.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "eicue/error.hpp"
#include "eicue/linalg.hpp"
#include "eicue/rng.hpp"

namespace eicue {

// Entry (i, j) = cos(a(i), b(j)); zero rows give zero entries.
inline Matrix corr_tensor(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw InvalidInput("corr_tensor: feature dims differ");
  Matrix c = matmul_nt(normalize_rows(a).unit, normalize_rows(b).unit);
  for (double& v : c.values()) v = std::clamp(v, -1.0, 1.0);
  return c;
}

inline double grand_mean(const Matrix& m) {
  if (m.empty()) return 0.0;
  double s = 0.0;
  for (double v : m.values()) s += v;
  return s / static_cast<double>(m.size());
}

inline double shift_b_aug(const Matrix& k_corr, const Matrix& s_corr, double k_shift) {
  return std::abs(grand_mean(k_corr) - grand_mean(s_corr) - k_shift);
}

inline double shift_b_rand(const Matrix& k_corr, const Matrix& s_corr, double k_shift,
                           double v_shift) {
  return (grand_mean(k_corr) + grand_mean(s_corr) - k_shift) * v_shift;
}

enum class CorrReduction { kSum, kMean };

inline CorrReduction parse_corr_reduction(const std::string& s) {
  if (s == "sum") return CorrReduction::kSum;
  if (s == "mean") return CorrReduction::kMean;
  throw InvalidInput("unknown correspondence reduction '" + s + "' (sum|mean)");
}

// -sum (F - b) S, or its mean over entries. Gradient is w.r.t. S with b held
// fixed.
inline LossAndGrad corr_loss(const Matrix& k_corr, const Matrix& s_corr, double b,
                             CorrReduction reduction = CorrReduction::kSum) {
  k_corr.require_same_shape(s_corr, "corr_loss");
  const double scale =
      reduction == CorrReduction::kMean && !s_corr.empty() ? 1.0 / double(s_corr.size()) : 1.0;
  LossAndGrad out{0.0, Matrix(s_corr.rows(), s_corr.cols())};
  auto f = k_corr.values();
  auto s = s_corr.values();
  auto g = out.grad.values();
  for (std::size_t i = 0; i < s.size(); ++i) {
    out.value -= (f[i] - b) * s[i];
    g[i] = -(f[i] - b) * scale;
  }
  out.value *= scale;
  return out;
}

struct CorrGrads {
  Matrix grad_a;  // dL/d(raw rows of a)
  Matrix grad_b;  // dL/d(raw rows of b)
};

// Chains a gradient on cos(a(i), b(j)) back into the raw rows of a and b.
inline CorrGrads corr_backward(const Matrix& a, const Matrix& b, const Matrix& grad_corr) {
  const NormalizedRows na = normalize_rows(a);
  const NormalizedRows nb = normalize_rows(b);
  return {normalize_rows_backward(na, matmul(grad_corr, nb.unit)),
          normalize_rows_backward(nb, matmul_tn(grad_corr, na.unit))};
}

struct DistillConfig {
  double k_shift = 0.0;
  double v_shift = 3.5;
  CorrReduction reduction = CorrReduction::kSum;
};

struct CorrTerm {
  double value = 0.0;
  double shift = 0.0;
  Matrix grad_s_a;  // w.r.t. the first S grid
  Matrix grad_s_b;  // w.r.t. the second S grid
};

enum class ShiftKind { kAug, kRand };

// L_cd(cos(K_a, K_b), cos(S_a, S_b), b) with b the adaptive shift of `kind`.
inline CorrTerm corr_term(const Matrix& k_a, const Matrix& k_b, const Matrix& s_a,
                          const Matrix& s_b, ShiftKind kind, const DistillConfig& cfg) {
  const Matrix kc = corr_tensor(k_a, k_b);
  const Matrix sc = corr_tensor(s_a, s_b);
  const double b = kind == ShiftKind::kAug ? shift_b_aug(kc, sc, cfg.k_shift)
                                           : shift_b_rand(kc, sc, cfg.k_shift, cfg.v_shift);
  const LossAndGrad l = corr_loss(kc, sc, b, cfg.reduction);
  CorrGrads g = corr_backward(s_a, s_b, l.grad);
  return {l.value, b, std::move(g.grad_a), std::move(g.grad_b)};
}

struct CorrTotal {
  double value = 0.0;
  CorrTerm aug;
  CorrTerm rand;
};

// L_corr = L_cd(K_aug, S_aug, b_aug) + L_cd(K_rand, S_rand, b_rand). The
// augmented pair is (K, K~) / (S, S~); the random pair is the sample against
// its batch partner.
inline CorrTotal corr_total(const Matrix& k, const Matrix& k_aug, const Matrix& s,
                            const Matrix& s_aug, const Matrix& k_partner,
                            const Matrix& s_partner, const DistillConfig& cfg) {
  CorrTotal out;
  out.aug = corr_term(k, k_aug, s, s_aug, ShiftKind::kAug, cfg);
  out.rand = corr_term(k, k_partner, s, s_partner, ShiftKind::kRand, cfg);
  out.value = out.aug.value + out.rand.value;
  return out;
}

// Uniform over [0, batch) \ {self}. A batch of one has no partner.
inline std::size_t pick_partner(std::size_t batch, std::size_t self, Rng& rng) {
  if (batch < 2) throw SkipTerm("pick_partner: batch of one has no random partner");
  if (self >= batch) throw InvalidInput("pick_partner: self outside batch");
  const auto r = static_cast<std::size_t>(rng.index(batch - 1));
  return r >= self ? r + 1 : r;
}

}  // namespace eicue
