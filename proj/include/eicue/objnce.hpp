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

// Object-centric contrastive learning driven by the EiCue map: per-object
// index sets, prototype selection, similarity weights and the prototype
// InfoNCE loss with gradients for the target features and the prototypes.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "eicue/error.hpp"
#include "eicue/grid.hpp"
#include "eicue/linalg.hpp"

namespace eicue {

struct ObjectMasks {
  SegmentMap labels;
  std::vector<int> present;                          // distinct labels, ascending
  std::vector<std::vector<std::size_t>> index_sets;  // index_sets[s] = I_{present[s]}
  std::vector<std::size_t> slot;                     // slot[i]: position of patch i's label

  std::size_t objects() const noexcept { return present.size(); }
};

inline ObjectMasks object_masks(const SegmentMap& map) {
  ObjectMasks out;
  out.labels = map;
  std::map<int, std::vector<std::size_t>> sets;
  for (std::size_t i = 0; i < map.n(); ++i) sets[map.labels[i]].push_back(i);
  std::map<int, std::size_t> slot_of;
  for (auto& [label, idx] : sets) {
    slot_of[label] = out.present.size();
    out.present.push_back(label);
    out.index_sets.push_back(std::move(idx));
  }
  out.slot.resize(map.n());
  for (std::size_t i = 0; i < map.n(); ++i) out.slot[i] = slot_of[map.labels[i]];
  return out;
}

struct MedoidChoice {
  std::vector<double> phi;
  std::size_t index;
};

// m* = argmin_{m in I} sum_{i in I} ||z(m) - z(i)||_2, smallest index on ties.
inline MedoidChoice medoid_prototype(const Matrix& z, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw InvalidInput("medoid_prototype: empty index set");
  const std::size_t n = indices.size();
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    const auto za = z.row(indices[a]);
    for (std::size_t b = a + 1; b < n; ++b) {
      const auto zb = z.row(indices[b]);
      double s = 0.0;
      for (std::size_t j = 0; j < za.size(); ++j) s += (za[j] - zb[j]) * (za[j] - zb[j]);
      dist[a * n + b] = dist[b * n + a] = std::sqrt(s);
    }
  }
  // Visit members in ascending patch order so ties resolve to the smallest index.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return indices[a] < indices[b]; });
  std::size_t best = order[0];
  double best_sum = std::numeric_limits<double>::infinity();
  for (std::size_t a : order) {
    double s = 0.0;
    for (std::size_t b : order) s += dist[a * n + b];
    if (s < best_sum) {
      best_sum = s;
      best = a;
    }
  }
  const auto row = z.row(indices[best]);
  return {std::vector<double>(row.begin(), row.end()), indices[best]};
}

enum class PrototypeMethod { kMedoid, kCentroid, kPca };

inline PrototypeMethod parse_prototype_method(const std::string& s) {
  if (s == "medoid") return PrototypeMethod::kMedoid;
  if (s == "centroid") return PrototypeMethod::kCentroid;
  if (s == "pca") return PrototypeMethod::kPca;
  throw InvalidInput("unknown prototype method '" + s + "' (medoid|centroid|pca)");
}

// One prototype per present object. `sources[s]` lists the rows of the
// anchor features the prototype was built from, with their linear weights,
// which is what the prototype gradient flows back into.
struct Prototypes {
  PrototypeMethod method = PrototypeMethod::kMedoid;
  Matrix phi;                                                     // objects x D
  std::vector<std::size_t> chosen;                                // selected row (medoid/pca)
  std::vector<std::vector<std::pair<std::size_t, double>>> sources;
};

namespace detail {

// Member with the largest projection onto the first principal component of
// the set (component sign fixed so its largest-magnitude entry is positive).
inline std::size_t pca_choice(const Matrix& z, const std::vector<std::size_t>& indices) {
  const std::size_t d = z.cols();
  if (indices.size() == 1) return indices[0];
  std::vector<double> mean(d, 0.0);
  for (auto i : indices)
    for (std::size_t j = 0; j < d; ++j) mean[j] += z(i, j) / double(indices.size());
  Matrix cov(d, d);
  for (auto i : indices) {
    for (std::size_t a = 0; a < d; ++a) {
      const double da = z(i, a) - mean[a];
      for (std::size_t b = 0; b < d; ++b) cov(a, b) += da * (z(i, b) - mean[b]);
    }
  }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a + 1; b < d; ++b) cov(b, a) = cov(a, b);
  const EigenBasis eb = sym_eigendecompose(SymMatrix(cov));
  std::vector<double> pc = eb.vectors.column(d - 1);
  std::size_t best = indices[0];
  double best_proj = -std::numeric_limits<double>::infinity();
  for (auto i : indices) {
    double p = 0.0;
    for (std::size_t j = 0; j < d; ++j) p += (z(i, j) - mean[j]) * pc[j];
    if (p > best_proj) {
      best_proj = p;
      best = i;
    }
  }
  return best;
}

}  // namespace detail

inline Prototypes build_prototypes(const Matrix& z, const ObjectMasks& masks,
                                   PrototypeMethod method = PrototypeMethod::kMedoid) {
  Prototypes out;
  out.method = method;
  out.phi = Matrix(masks.objects(), z.cols());
  out.chosen.assign(masks.objects(), std::numeric_limits<std::size_t>::max());
  out.sources.resize(masks.objects());
  for (std::size_t s = 0; s < masks.objects(); ++s) {
    const auto& idx = masks.index_sets[s];
    switch (method) {
      case PrototypeMethod::kMedoid:
      case PrototypeMethod::kPca: {
        const std::size_t m = method == PrototypeMethod::kMedoid ? medoid_prototype(z, idx).index
                                                                 : detail::pca_choice(z, idx);
        std::copy(z.row(m).begin(), z.row(m).end(), out.phi.row(s).begin());
        out.chosen[s] = m;
        out.sources[s] = {{m, 1.0}};
        break;
      }
      case PrototypeMethod::kCentroid: {
        const double wgt = 1.0 / double(idx.size());
        for (auto i : idx) {
          for (std::size_t j = 0; j < z.cols(); ++j) out.phi(s, j) += wgt * z(i, j);
          out.sources[s].emplace_back(i, wgt);
        }
        break;
      }
    }
  }
  return out;
}

// Routes prototype gradients back into the anchor feature rows.
inline void accumulate_prototype_grad(const Prototypes& protos, const Matrix& grad_protos,
                                      Matrix& grad_source) {
  for (std::size_t s = 0; s < protos.sources.size(); ++s) {
    for (const auto& [row, wgt] : protos.sources[s]) {
      auto dst = grad_source.row(row);
      auto src = grad_protos.row(s);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += wgt * src[j];
    }
  }
}

// w(i) = (1/N) sum_j K(i) . K(j) = K(i) . mean_j K(j)
inline std::vector<double> obj_weights(const Matrix& k, bool clamp_negative = false) {
  const std::size_t n = k.rows(), d = k.cols();
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += k(i, j);
  for (double& v : mean) v /= double(n);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = dot(k.row(i), mean);
    if (clamp_negative) w[i] = std::max(w[i], 0.0);
  }
  return w;
}

struct ObjNceResult {
  double value = 0.0;
  Matrix grad_target;  // N x D
  Matrix grad_protos;  // objects x D
};

// (1/N) sum_i w(i) [ -log( exp(cos(z(i), phi_l)/tau) / sum_{j != l} exp(cos(z(i), phi_j)/tau) ) ]
// with l the object of patch i; the positive prototype is not part of the
// denominator.
inline ObjNceResult objnce_loss(const Matrix& z_target, const ObjectMasks& masks,
                                const Prototypes& protos, const std::vector<double>& w,
                                double tau) {
  if (!(tau > 0.0)) throw InvalidInput("objnce_loss: tau must be > 0");
  const std::size_t n = z_target.rows(), d = z_target.cols(), objects = masks.objects();
  if (objects < 2)
    throw DegenerateContrast("objnce_loss: " + std::to_string(objects) +
                             " object(s) present, need at least 2");
  if (protos.phi.rows() != objects || protos.phi.cols() != d)
    throw InvalidInput("objnce_loss: prototypes do not match masks/features");
  if (masks.slot.size() != n || w.size() != n)
    throw InvalidInput("objnce_loss: masks/weights do not cover every patch");

  const NormalizedRows zt = normalize_rows(z_target);
  const NormalizedRows ph = normalize_rows(protos.phi);
  ObjNceResult out{0.0, Matrix(n, d), Matrix(objects, d)};
  Matrix proto_a(objects, d);                 // sum_i c_ij zhat_i
  std::vector<double> proto_b(objects, 0.0);  // sum_i c_ij s_ij
  std::vector<double> sim(objects), coef(objects);
  const double inv_n = 1.0 / double(n);

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t own = masks.slot[i];
    const auto zi = zt.unit.row(i);
    for (std::size_t j = 0; j < objects; ++j) sim[j] = dot(zi, ph.unit.row(j));
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < objects; ++j)
      if (j != own) mx = std::max(mx, sim[j] / tau);
    double denom = 0.0;
    for (std::size_t j = 0; j < objects; ++j)
      if (j != own) denom += std::exp(sim[j] / tau - mx);
    const double term = -sim[own] / tau + mx + std::log(denom);
    const double scale = w[i] * inv_n;
    out.value += scale * term;
    if (scale == 0.0) continue;

    for (std::size_t j = 0; j < objects; ++j) {
      coef[j] = j == own ? -1.0 / tau : std::exp(sim[j] / tau - mx) / denom / tau;
      coef[j] *= scale;
    }
    if (zt.norms[i] >= kZeroNorm) {
      double cs = 0.0;
      for (std::size_t j = 0; j < objects; ++j) cs += coef[j] * sim[j];
      auto g = out.grad_target.row(i);
      for (std::size_t j = 0; j < objects; ++j) {
        const auto pj = ph.unit.row(j);
        for (std::size_t c = 0; c < d; ++c) g[c] += coef[j] * pj[c];
      }
      for (std::size_t c = 0; c < d; ++c) g[c] = (g[c] - cs * zi[c]) / zt.norms[i];
    }
    for (std::size_t j = 0; j < objects; ++j) {
      auto a = proto_a.row(j);
      for (std::size_t c = 0; c < d; ++c) a[c] += coef[j] * zi[c];
      proto_b[j] += coef[j] * sim[j];
    }
  }
  for (std::size_t j = 0; j < objects; ++j) {
    if (ph.norms[j] < kZeroNorm) continue;
    auto g = out.grad_protos.row(j);
    const auto a = proto_a.row(j);
    const auto pj = ph.unit.row(j);
    for (std::size_t c = 0; c < d; ++c) g[c] = (a[c] - proto_b[j] * pj[c]) / ph.norms[j];
  }
  return out;
}

// L_nce^{x<->x~} = (lambda_obj l_obj_xx + lambda_sc l_sc_xx~) +
//                  (lambda_obj l_obj_x~x~ + lambda_sc l_sc_x~x)
inline double combine_objnce(double l_obj_xx, double l_sc_xxa, double l_obj_xaxa,
                             double l_sc_xax, double lambda_obj, double lambda_sc) {
  return (lambda_obj * l_obj_xx + lambda_sc * l_sc_xxa) +
         (lambda_obj * l_obj_xaxa + lambda_sc * l_sc_xax);
}

struct ObjNceView {
  const Matrix& z;                // projected features of this view
  const ObjectMasks& masks;       // EiCue masks of this view
  const std::vector<double>& w;   // similarity weights of this view
};

struct BidirectionalObjNce {
  double value = 0.0;
  double l_obj_xx = 0.0, l_sc_xxa = 0.0, l_obj_xaxa = 0.0, l_sc_xax = 0.0;
  Matrix grad_z;      // dL/dZ
  Matrix grad_z_aug;  // dL/dZ~
};

// Both directions of the object-centric loss. Prototypes of each direction
// come from the source view's features and EiCue masks; the consistency term
// applies them to the other view at the same patch positions.
inline BidirectionalObjNce objnce_bidirectional(const ObjNceView& x, const ObjNceView& xa,
                                                double tau, double lambda_obj, double lambda_sc,
                                                PrototypeMethod method = PrototypeMethod::kMedoid) {
  if (x.masks.objects() < 2 || xa.masks.objects() < 2)
    throw DegenerateContrast("objnce_bidirectional: a view has fewer than 2 objects");
  BidirectionalObjNce out;
  out.grad_z = Matrix(x.z.rows(), x.z.cols());
  out.grad_z_aug = Matrix(xa.z.rows(), xa.z.cols());

  auto direction = [&](const ObjNceView& src, const ObjNceView& other, Matrix& g_src,
                       Matrix& g_other, double& l_obj, double& l_sc) {
    const Prototypes protos = build_prototypes(src.z, src.masks, method);
    ObjNceResult obj = objnce_loss(src.z, src.masks, protos, src.w, tau);
    ObjNceResult sc = objnce_loss(other.z, src.masks, protos, src.w, tau);
    l_obj = obj.value;
    l_sc = sc.value;
    obj.grad_target *= lambda_obj;
    obj.grad_protos *= lambda_obj;
    sc.grad_target *= lambda_sc;
    sc.grad_protos *= lambda_sc;
    g_src += obj.grad_target;
    g_other += sc.grad_target;
    Matrix gp = obj.grad_protos;
    gp += sc.grad_protos;
    accumulate_prototype_grad(protos, gp, g_src);
  };
  direction(x, xa, out.grad_z, out.grad_z_aug, out.l_obj_xx, out.l_sc_xxa);
  direction(xa, x, out.grad_z_aug, out.grad_z, out.l_obj_xaxa, out.l_sc_xax);
  out.value = combine_objnce(out.l_obj_xx, out.l_sc_xxa, out.l_obj_xaxa, out.l_sc_xax,
                             lambda_obj, lambda_sc);
  return out;
}

}  // namespace eicue
