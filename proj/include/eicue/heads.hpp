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

// Segmentation head S = LinA(K') + LinC(ReLU(LinB(K'))) and projection head
// Z = Lin(S), with hand-written backward passes.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "eicue/error.hpp"
#include "eicue/grid.hpp"
#include "eicue/linalg.hpp"
#include "eicue/rng.hpp"

namespace eicue {

// Y = X W + b with W stored in x out and b as a 1 x out row.
struct Linear {
  Matrix w, b;
  Matrix gw, gb;

  Linear() = default;
  Linear(std::size_t in, std::size_t out) : w(in, out), b(1, out), gw(in, out), gb(1, out) {}

  std::size_t in() const noexcept { return w.rows(); }
  std::size_t out() const noexcept { return w.cols(); }

  // Uniform in +-1/sqrt(fan_in), zero bias.
  void init_uniform(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in()));
    for (double& v : w.values()) v = rng.uniform(-bound, bound);
    b.fill(0.0);
  }

  Matrix forward(const Matrix& x) const {
    if (x.cols() != in())
      throw InvalidInput("Linear: input dim " + std::to_string(x.cols()) + " != " +
                         std::to_string(in()));
    Matrix y = matmul(x, w);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      auto r = y.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) r[j] += b(0, j);
    }
    return y;
  }

  // Accumulates dW += X^T dY, db += colsum(dY); returns dX = dY W^T.
  Matrix backward(const Matrix& x, const Matrix& dy) {
    gw += matmul_tn(x, dy);
    for (std::size_t i = 0; i < dy.rows(); ++i)
      for (std::size_t j = 0; j < dy.cols(); ++j) gb(0, j) += dy(i, j);
    return matmul_nt(dy, w);
  }

  void zero_grad() {
    gw.fill(0.0);
    gb.fill(0.0);
  }
};

struct TensorRef {
  std::string name;
  Matrix* value;
  Matrix* grad;
};

struct HeadParams {
  Linear seg_a;  // D_K -> D_S, skip branch
  Linear seg_b;  // D_K -> D_S, before ReLU
  Linear seg_c;  // D_S -> D_S, after ReLU
  Linear proj;   // D_S -> D_Z
  std::uint64_t version = 0;  // bumped on every parameter update

  HeadParams() = default;
  HeadParams(std::size_t d_k, std::size_t d_s, std::size_t d_z)
      : seg_a(d_k, d_s), seg_b(d_k, d_s), seg_c(d_s, d_s), proj(d_s, d_z) {}

  static HeadParams initialized(std::size_t d_k, std::size_t d_s, std::size_t d_z,
                                std::uint64_t seed) {
    HeadParams p(d_k, d_s, d_z);
    Rng rng = Rng::derive(seed, {0x68656164ull});
    p.seg_a.init_uniform(rng);
    p.seg_b.init_uniform(rng);
    p.seg_c.init_uniform(rng);
    p.proj.init_uniform(rng);
    return p;
  }

  std::size_t d_k() const noexcept { return seg_a.in(); }
  std::size_t d_s() const noexcept { return seg_a.out(); }
  std::size_t d_z() const noexcept { return proj.out(); }

  // Declaration order; also the checkpoint order.
  std::vector<TensorRef> tensors() {
    return {{"seg_a.w", &seg_a.w, &seg_a.gw}, {"seg_a.b", &seg_a.b, &seg_a.gb},
            {"seg_b.w", &seg_b.w, &seg_b.gw}, {"seg_b.b", &seg_b.b, &seg_b.gb},
            {"seg_c.w", &seg_c.w, &seg_c.gw}, {"seg_c.b", &seg_c.b, &seg_c.gb},
            {"proj.w", &proj.w, &proj.gw},    {"proj.b", &proj.b, &proj.gb}};
  }

  void zero_grad() {
    seg_a.zero_grad();
    seg_b.zero_grad();
    seg_c.zero_grad();
    proj.zero_grad();
  }

  bool all_finite() const {
    for (const Linear* l : {&seg_a, &seg_b, &seg_c, &proj})
      if (!l->w.all_finite() || !l->b.all_finite()) return false;
    return true;
  }
};

// Per-channel multipliers: 0 for dropped channels, 1/(1-p) for survivors.
// An empty mask is the identity (eval mode).
struct DropoutMask {
  std::vector<double> scale;
  bool identity() const noexcept { return scale.empty(); }
};

inline DropoutMask channel_dropout_mask(std::size_t channels, double p, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw InvalidInput("channel_dropout_mask: p must be in [0, 1)");
  DropoutMask m;
  if (p == 0.0) return m;
  m.scale.resize(channels);
  const double keep = 1.0 / (1.0 - p);
  for (double& s : m.scale) s = rng.uniform() < p ? 0.0 : keep;
  return m;
}

inline Matrix apply_dropout(const Matrix& x, const DropoutMask& mask) {
  if (mask.identity()) return x;
  if (mask.scale.size() != x.cols()) throw InvalidInput("apply_dropout: mask width mismatch");
  Matrix y = x;
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto r = y.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] *= mask.scale[j];
  }
  return y;
}

struct SegCache {
  Matrix k_in;    // K after dropout
  Matrix pre_b;   // LinB(K') before ReLU
  Matrix relu_b;  // ReLU(LinB(K'))
  DropoutMask mask;
  std::uint64_t version = 0;
  bool valid = false;
};

inline FeatureGrid seg_forward(const FeatureGrid& k, const HeadParams& p,
                               const DropoutMask& mask = {}, SegCache* cache = nullptr) {
  if (k.d() != p.d_k())
    throw InvalidInput("seg_forward: feature dim " + std::to_string(k.d()) + " != D_K " +
                       std::to_string(p.d_k()));
  Matrix k_in = apply_dropout(k.data(), mask);
  Matrix s = p.seg_a.forward(k_in);
  Matrix pre = p.seg_b.forward(k_in);
  Matrix act = pre;
  for (double& v : act.values()) v = v > 0.0 ? v : 0.0;
  s += p.seg_c.forward(act);
  if (cache) {
    cache->k_in = std::move(k_in);
    cache->pre_b = std::move(pre);
    cache->relu_b = std::move(act);
    cache->mask = mask;
    cache->version = p.version;
    cache->valid = true;
  }
  return FeatureGrid(k.h(), k.w(), std::move(s));
}

// Returns dL/dK (w.r.t. the features before dropout) and accumulates
// parameter gradients into `p`.
inline Matrix seg_backward(const Matrix& grad_s, const SegCache& cache, HeadParams& p) {
  if (!cache.valid || cache.version != p.version)
    throw InvalidState("seg_backward: forward cache is stale");
  if (grad_s.rows() != cache.k_in.rows() || grad_s.cols() != p.d_s())
    throw InvalidInput("seg_backward: upstream gradient shape mismatch");
  Matrix dk = p.seg_a.backward(cache.k_in, grad_s);
  Matrix d_act = p.seg_c.backward(cache.relu_b, grad_s);
  auto pre = cache.pre_b.values();
  auto da = d_act.values();
  for (std::size_t i = 0; i < da.size(); ++i)
    if (!(pre[i] > 0.0)) da[i] = 0.0;
  dk += p.seg_b.backward(cache.k_in, d_act);
  return apply_dropout(dk, cache.mask);
}

struct ProjCache {
  Matrix s_in;
  std::uint64_t version = 0;
  bool valid = false;
};

inline FeatureGrid proj_forward(const FeatureGrid& s, const HeadParams& p,
                                ProjCache* cache = nullptr) {
  if (s.d() != p.d_s())
    throw InvalidInput("proj_forward: feature dim " + std::to_string(s.d()) + " != D_S " +
                       std::to_string(p.d_s()));
  Matrix z = p.proj.forward(s.data());
  if (cache) {
    cache->s_in = s.data();
    cache->version = p.version;
    cache->valid = true;
  }
  return FeatureGrid(s.h(), s.w(), std::move(z));
}

inline Matrix proj_backward(const Matrix& grad_z, const ProjCache& cache, HeadParams& p) {
  if (!cache.valid || cache.version != p.version)
    throw InvalidState("proj_backward: forward cache is stale");
  if (grad_z.rows() != cache.s_in.rows() || grad_z.cols() != p.d_z())
    throw InvalidInput("proj_backward: upstream gradient shape mismatch");
  return p.proj.backward(cache.s_in, grad_z);
}

}  // namespace eicue
