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

// End-to-end optimization of the segmentation head, projection head and
// cluster centers:
//
//   L_total = lambda_nce L_nce + (1 - lambda_nce) L_corr + lambda_eig L_eig
//
// Each step runs the per-sample pipeline (forward, affinity, Laplacian,
// eigenfeatures, EiCue, losses) concurrently, then merges gradients in a
// fixed sample order so results do not depend on the thread count.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "eicue/affinity.hpp"
#include "eicue/config.hpp"
#include "eicue/distill.hpp"
#include "eicue/eigen_cluster.hpp"
#include "eicue/error.hpp"
#include "eicue/grid.hpp"
#include "eicue/heads.hpp"
#include "eicue/linalg.hpp"
#include "eicue/objnce.hpp"
#include "eicue/optim.hpp"
#include "eicue/parallel.hpp"
#include "eicue/rng.hpp"
#include "eicue/spectral.hpp"

namespace eicue {

inline double lambda_nce_at(std::int64_t step, const TrainConfig& cfg) {
  if (step < 0) throw InvalidInput("lambda_nce_at: negative step");
  const double t = std::min(1.0, double(step) / double(cfg.ramp_steps));
  double r = t;
  switch (cfg.ramp_shape) {
    case RampShape::kLinear: r = t; break;
    case RampShape::kCosine: r = 0.5 * (1.0 - std::cos(std::numbers::pi * t)); break;
    case RampShape::kExponential: r = (1.0 - std::exp(-5.0 * t)) / (1.0 - std::exp(-5.0)); break;
  }
  return std::min(r, 1.0) * cfg.lambda_nce_target;
}

struct LossParts {
  double l_nce = 0.0;
  double l_corr = 0.0;
  double l_eig = 0.0;
};

inline double total_loss(const LossParts& p, double lambda_nce, double lambda_eig) {
  if (!std::isfinite(p.l_nce) || !std::isfinite(p.l_corr) || !std::isfinite(p.l_eig))
    throw NumericalFailure("total_loss: non-finite loss part (nce=" + std::to_string(p.l_nce) +
                           ", corr=" + std::to_string(p.l_corr) +
                           ", eig=" + std::to_string(p.l_eig) + ")");
  return lambda_nce * p.l_nce + (1.0 - lambda_nce) * p.l_corr + lambda_eig * p.l_eig;
}

struct StepMetrics {
  std::int64_t step = 0;
  double l_total = 0.0;
  double l_corr = 0.0;
  double l_eig = 0.0;
  double l_obj = 0.0;  // batch mean of l_obj_xx + l_obj_x~x~
  double l_sc = 0.0;   // batch mean of l_sc_xx~ + l_sc_x~x
  double lambda_nce = 0.0;
  double wall_ms = 0.0;
  std::size_t skipped_contrast = 0;  // samples whose EiCue map had < 2 objects
};

inline constexpr const char* kMetricsHeader = "step,l_total,l_corr,l_eig,l_obj,l_sc,lambda_nce,wall_ms";

inline std::string metrics_row(const StepMetrics& m) {
  return std::to_string(m.step) + "," + detail::format_double(m.l_total) + "," +
         detail::format_double(m.l_corr) + "," + detail::format_double(m.l_eig) + "," +
         detail::format_double(m.l_obj) + "," + detail::format_double(m.l_sc) + "," +
         detail::format_double(m.lambda_nce) + "," + detail::format_double(m.wall_ms);
}

// Everything a checkpoint holds.
struct TrainState {
  HeadParams params;
  ClusterCenters centers;
  Optimizer opt_heads;
  Optimizer opt_centers;
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  bool centers_ready = false;
};

inline TrainState initial_state(const TrainConfig& cfg, std::size_t d_k) {
  TrainState s;
  s.params = HeadParams::initialized(d_k, std::size_t(cfg.d_s), std::size_t(cfg.d_z), cfg.seed);
  Matrix c(std::size_t(cfg.k_eigenvectors), std::size_t(cfg.c_classes));
  for (std::size_t j = 0; j < c.cols(); ++j) c(j % c.rows(), j) = 1.0;
  s.centers = ClusterCenters(std::move(c));
  s.opt_heads = Optimizer(cfg.optimizer, cfg.adam);
  s.opt_centers = Optimizer(cfg.optimizer, cfg.adam);
  s.seed = cfg.seed;
  return s;
}

namespace detail {

enum StreamTag : std::uint64_t {
  kBatchStream = 0x62617463,
  kDropStream = 0x64726f70,
  kPartnerStream = 0x70617274,
  kCenterStream = 0x63656e74,
};

struct ViewState {
  SegCache seg;
  ProjCache proj;
  FeatureGrid s, z;
  Matrix v_hat;
  Matrix p;
  SegmentMap eicue;
  LossAndGrad eig;
};

struct SampleWork {
  ViewState x, xa;
  Matrix grad_s, grad_s_aug;  // accumulated dL/dS, dL/dS~ for this sample
  Matrix grad_z, grad_z_aug;
  double l_obj = 0.0, l_sc = 0.0, l_nce = 0.0, l_eig = 0.0;
  bool contrast = false;
};

}  // namespace detail

class Trainer {
 public:
  Trainer(TrainConfig cfg, const std::vector<SamplePair>& data)
      : cfg_(std::move(cfg)), data_(&data) {
    cfg_.validate();
    if (data.empty()) throw DataError("Trainer: empty dataset");
    const std::size_t d_k = data.front().base.d();
    for (const auto& s : data) {
      s.validate();
      if (s.base.d() != d_k) throw DataError("Trainer: sample " + s.id + " has a different D_K");
      if (s.base.n() < std::size_t(cfg_.k_eigenvectors))
        throw DataError("Trainer: sample " + s.id + " has fewer patches than k_eigenvectors");
    }
    state_ = initial_state(cfg_, d_k);
    color_.resize(data.size());
    parallel_for(data.size(), [&](std::size_t i) {
      color_[i] = color_affinity(data[i].image, cfg_.affinity);
    });
    init_centers();
  }

  const TrainConfig& config() const noexcept { return cfg_; }
  TrainState& state() noexcept { return state_; }
  const TrainState& state() const noexcept { return state_; }
  void set_state(TrainState s) {
    if (s.params.d_k() != state_.params.d_k() || s.params.d_s() != state_.params.d_s() ||
        s.params.d_z() != state_.params.d_z() || s.centers.k() != state_.centers.k() ||
        s.centers.classes() != state_.centers.classes())
      throw InvalidInput("Trainer::set_state: dimensions differ from the config");
    state_ = std::move(s);
  }

  // Times ObjNCE was evaluated for a sample, across all steps.
  std::uint64_t objnce_evaluations() const noexcept { return objnce_evals_; }

  // Batch for step t: batch_size distinct samples (or the whole set if
  // smaller), drawn from a stream derived from (seed, t).
  std::vector<std::size_t> batch_indices(std::int64_t step) const {
    const std::size_t n = data_->size();
    const std::size_t b = std::min<std::size_t>(n, std::size_t(cfg_.batch_size));
    Rng rng = Rng::derive(state_.seed, {detail::kBatchStream, std::uint64_t(step)});
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < b; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
    idx.resize(b);
    return idx;
  }

  StepMetrics step() { return train_step(batch_indices(state_.step)); }

  StepMetrics train_step(const std::vector<std::size_t>& batch) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t bsz = batch.size();
    if (bsz == 0) throw InvalidInput("train_step: empty batch");
    const std::int64_t t = state_.step;
    const double lambda_nce = lambda_nce_at(t, cfg_);
    const std::size_t k = std::size_t(cfg_.k_eigenvectors);
    HeadParams& params = state_.params;
    const auto& data = *data_;

    // Forward and spectral stage, one sample per task.
    std::vector<detail::SampleWork> work(bsz);
    parallel_for(bsz, [&](std::size_t b) {
      const SamplePair& sp = data[batch[b]];
      auto& w = work[b];
      auto view = [&](const FeatureGrid& feats, std::uint64_t tag, detail::ViewState& v) {
        Rng drop = Rng::derive(state_.seed, {detail::kDropStream, std::uint64_t(t), b, tag});
        const DropoutMask mask = channel_dropout_mask(feats.d(), cfg_.dropout, drop);
        v.s = seg_forward(feats, params, mask, &v.seg);
        v.z = proj_forward(v.s, params, &v.proj);
        const SymMatrix a = with_ridge(
            adjacency(color_[batch[b]], semantic_affinity(v.s, cfg_.affinity)), cfg_.affinity.ridge);
        v.v_hat = spectral_bundle(a, k).v_hat;
      };
      view(sp.base, 0, w.x);
      view(sp.aug, 1, w.xa);
    });

    // Partners are drawn serially so the stream is independent of threading.
    std::vector<std::optional<std::size_t>> partner(bsz);
    {
      Rng rng = Rng::derive(state_.seed, {detail::kPartnerStream, std::uint64_t(t)});
      for (std::size_t b = 0; b < bsz; ++b) {
        try {
          partner[b] = pick_partner(bsz, b, rng);
        } catch (const SkipTerm&) {
          partner[b].reset();
        }
      }
    }

    const bool run_nce = lambda_nce > 0.0;
    const DistillConfig dcfg = cfg_.distill();
    std::vector<CorrTotal> corr(bsz);
    parallel_for(bsz, [&](std::size_t b) {
      const SamplePair& sp = data[batch[b]];
      auto& w = work[b];
      for (auto* v : {&w.x, &w.xa}) {
        v->p = assignment_scores(v->v_hat, state_.centers);
        v->eig = eig_loss(v->p);
        v->eicue = eicue_map(v->p, sp.base.h(), sp.base.w());
      }
      w.l_eig = 0.5 * (w.x.eig.value + w.xa.eig.value);
      w.grad_s = Matrix(sp.base.n(), params.d_s());
      w.grad_s_aug = Matrix(sp.base.n(), params.d_s());
      w.grad_z = Matrix(sp.base.n(), params.d_z());
      w.grad_z_aug = Matrix(sp.base.n(), params.d_z());

      if (run_nce) {
        const ObjectMasks mx = object_masks(w.x.eicue);
        const ObjectMasks ma = object_masks(w.xa.eicue);
        if (mx.objects() >= 2 && ma.objects() >= 2) {
          const auto wx = obj_weights(sp.base.data(), cfg_.clamp_obj_weights);
          const auto wa = obj_weights(sp.aug.data(), cfg_.clamp_obj_weights);
          BidirectionalObjNce r = objnce_bidirectional({w.x.z.data(), mx, wx},
                                                       {w.xa.z.data(), ma, wa}, cfg_.tau,
                                                       cfg_.lambda_obj, cfg_.lambda_sc,
                                                       cfg_.prototype);
          w.l_obj = r.l_obj_xx + r.l_obj_xaxa;
          w.l_sc = r.l_sc_xxa + r.l_sc_xax;
          w.l_nce = r.value;
          w.grad_z = std::move(r.grad_z);
          w.grad_z_aug = std::move(r.grad_z_aug);
          w.contrast = true;
        }
      }

      const Matrix& k = sp.base.data();
      CorrTotal c;
      c.aug = corr_term(k, sp.aug.data(), w.x.s.data(), w.xa.s.data(), ShiftKind::kAug, dcfg);
      if (partner[b]) {
        const std::size_t q = *partner[b];
        c.rand = corr_term(k, data[batch[q]].base.data(), w.x.s.data(), work[q].x.s.data(),
                           ShiftKind::kRand, dcfg);
      }
      c.value = c.aug.value + c.rand.value;
      corr[b] = std::move(c);
    });

    // Loss assembly.
    StepMetrics m;
    m.step = t;
    m.lambda_nce = lambda_nce;
    const double inv_b = 1.0 / double(bsz);
    for (std::size_t b = 0; b < bsz; ++b) {
      const auto& w = work[b];
      m.l_corr += corr[b].value * inv_b;
      m.l_eig += w.l_eig * inv_b;
      m.l_obj += w.l_obj * inv_b;
      m.l_sc += w.l_sc * inv_b;
      if (run_nce && w.contrast) ++objnce_evals_;
      if (run_nce && !w.contrast) ++m.skipped_contrast;
    }
    double l_nce = 0.0;
    for (const auto& w : work) l_nce += w.l_nce * inv_b;
    m.l_total = total_loss({l_nce, m.l_corr, m.l_eig}, lambda_nce, cfg_.lambda_eig);

    // Serialized gradient merge and backward, in batch order.
    const double w_corr = (1.0 - lambda_nce) * inv_b;
    const double w_nce = lambda_nce * inv_b;
    for (std::size_t b = 0; b < bsz; ++b) {
      auto& w = work[b];
      add_scaled(w.grad_s, corr[b].aug.grad_s_a, w_corr);
      add_scaled(w.grad_s_aug, corr[b].aug.grad_s_b, w_corr);
      if (partner[b]) {
        add_scaled(w.grad_s, corr[b].rand.grad_s_a, w_corr);
        add_scaled(work[*partner[b]].grad_s, corr[b].rand.grad_s_b, w_corr);
      }
    }
    params.zero_grad();
    Matrix grad_c(state_.centers.k(), state_.centers.classes());
    for (std::size_t b = 0; b < bsz; ++b) {
      auto& w = work[b];
      if (w.contrast) {
        w.grad_z *= w_nce;
        w.grad_z_aug *= w_nce;
        w.grad_s += proj_backward(w.grad_z, w.x.proj, params);
        w.grad_s_aug += proj_backward(w.grad_z_aug, w.xa.proj, params);
      }
      seg_backward(w.grad_s, w.x.seg, params);
      seg_backward(w.grad_s_aug, w.xa.seg, params);
      const double w_eig = 0.5 * cfg_.lambda_eig * inv_b;
      add_scaled(grad_c, centers_gradient(w.x.v_hat, w.x.eig.grad), w_eig);
      add_scaled(grad_c, centers_gradient(w.xa.v_hat, w.xa.eig.grad), w_eig);
    }
    state_.centers.grad = grad_c;

    if (cfg_.lr_heads > 0.0) {
      std::vector<Matrix*> values;
      std::vector<const Matrix*> grads;
      for (auto& tr : params.tensors()) {
        values.push_back(tr.value);
        grads.push_back(tr.grad);
      }
      state_.opt_heads.step(values, grads, cfg_.lr_heads);
      ++params.version;
      if (!params.all_finite()) throw NumericalFailure("train_step: non-finite head parameters");
    }
    if (cfg_.lr_centers > 0.0) {
      state_.opt_centers.step({&state_.centers.weights}, {&state_.centers.grad}, cfg_.lr_centers);
      state_.centers.normalize_columns();
    }
    ++state_.step;
    m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return m;
  }

 private:
  // k-means++ over the eval-mode eigenfeatures of the step-0 batch.
  void init_centers() {
    const auto batch = batch_indices(0);
    const std::size_t k = std::size_t(cfg_.k_eigenvectors);
    std::vector<Matrix> v(2 * batch.size());
    parallel_for(batch.size(), [&](std::size_t b) {
      const SamplePair& sp = (*data_)[batch[b]];
      const FeatureGrid* views[2] = {&sp.base, &sp.aug};
      for (std::size_t j = 0; j < 2; ++j) {
        const FeatureGrid s = seg_forward(*views[j], state_.params);
        const SymMatrix a = with_ridge(
            adjacency(color_[batch[b]], semantic_affinity(s, cfg_.affinity)), cfg_.affinity.ridge);
        v[2 * b + j] = spectral_bundle(a, k).v_hat;
      }
    });
    std::vector<const Matrix*> ptrs;
    for (const auto& m : v) ptrs.push_back(&m);
    Rng rng = Rng::derive(state_.seed, {detail::kCenterStream});
    state_.centers = init_centers_kmeanspp(ptrs, std::size_t(cfg_.c_classes), rng);
    state_.centers_ready = true;
  }

  static void add_scaled(Matrix& dst, const Matrix& src, double s) {
    auto d = dst.values();
    auto v = src.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * v[i];
  }

  TrainConfig cfg_;
  const std::vector<SamplePair>* data_;
  TrainState state_;
  std::vector<SymMatrix> color_;
  std::uint64_t objnce_evals_ = 0;
};

// Segmentation-head features of every sample's base view, eval mode.
inline std::vector<FeatureGrid> infer_features(const HeadParams& params,
                                               const std::vector<SamplePair>& data) {
  std::vector<FeatureGrid> out(data.size());
  parallel_for(data.size(), [&](std::size_t i) { out[i] = seg_forward(data[i].base, params); });
  return out;
}

}  // namespace eicue
