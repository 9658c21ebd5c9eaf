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

// Inference-time clustering, Hungarian matching, accuracy / mIoU, the linear
// probe, and label-map output.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "eicue/config.hpp"
#include "eicue/error.hpp"
#include "eicue/features.hpp"
#include "eicue/grid.hpp"
#include "eicue/linalg.hpp"
#include "eicue/parallel.hpp"
#include "eicue/rng.hpp"

namespace eicue {

struct ClusterResult {
  Matrix centers;                 // c x D, unit rows
  std::vector<SegmentMap> maps;   // one per input grid
  double objective = 0.0;         // sum over rows of 1 - cos(row, center)
  std::size_t iterations = 0;
};

struct KMeansOptions {
  std::size_t max_iter = 300;
  std::size_t restarts = 10;
};

namespace detail {

struct Lloyd {
  std::vector<std::size_t> assign;
  Matrix centers;
  double objective = 0.0;
  std::size_t iterations = 0;
};

inline std::size_t nearest(const Matrix& centers, std::span<const double> x, double* best_cos) {
  std::size_t best = 0;
  double bc = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    const double v = dot(centers.row(c), x);
    if (v > bc) {
      bc = v;
      best = c;
    }
  }
  if (best_cos) *best_cos = bc;
  return best;
}

// Lloyd's iterations under cosine distance on unit rows, k-means++ seeding.
inline Lloyd cosine_lloyd(const Matrix& x, std::size_t c, Rng& rng, std::size_t max_iter) {
  const std::size_t n = x.rows(), d = x.cols();
  Lloyd out;
  out.centers = Matrix(c, d);
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::size_t pick = std::size_t(rng.index(n));
  for (std::size_t j = 0; j < c; ++j) {
    std::copy(x.row(pick).begin(), x.row(pick).end(), out.centers.row(j).begin());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], std::max(0.0, 1.0 - dot(x.row(i), x.row(pick))));
      total += dist[i] * dist[i];
    }
    if (j + 1 == c) break;
    if (total <= 0.0) {
      pick = std::size_t(rng.index(n));
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

  out.assign.assign(n, std::numeric_limits<std::size_t>::max());
  std::vector<double> cosv(n);
  for (std::size_t it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = nearest(out.centers, x.row(i), &cosv[i]);
      if (a != out.assign[i]) {
        out.assign[i] = a;
        changed = true;
      }
    }
    out.iterations = it + 1;
    if (!changed) break;
    Matrix sum(c, d);
    std::vector<std::size_t> count(c, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto s = sum.row(out.assign[i]);
      for (std::size_t j = 0; j < d; ++j) s[j] += x(i, j);
      ++count[out.assign[i]];
    }
    for (std::size_t j = 0; j < c; ++j) {
      auto s = sum.row(j);
      const double nrm = norm2(s);
      if (count[j] == 0 || nrm < kZeroNorm) {
        // Empty cluster: move it to the worst-fit row.
        std::size_t worst = 0;
        for (std::size_t i = 1; i < n; ++i)
          if (cosv[i] < cosv[worst]) worst = i;
        std::copy(x.row(worst).begin(), x.row(worst).end(), out.centers.row(j).begin());
        cosv[worst] = std::numeric_limits<double>::infinity();
        continue;
      }
      for (std::size_t k = 0; k < d; ++k) out.centers(j, k) = s[k] / nrm;
    }
  }
  out.objective = 0.0;
  for (std::size_t i = 0; i < n; ++i) out.objective += 1.0 - dot(x.row(i), out.centers.row(out.assign[i]));
  return out;
}

}  // namespace detail

// Cosine K-means over the row-normalized rows of all grids jointly. The best
// of `restarts` seeded runs (lowest objective, first on ties) is kept.
inline ClusterResult cluster_features(const std::vector<FeatureGrid>& features, std::size_t c,
                                      std::uint64_t seed, const KMeansOptions& opt = {}) {
  if (c < 1) throw InvalidInput("cluster_features: c_classes must be >= 1");
  std::size_t total = 0, d = 0;
  for (const auto& g : features) {
    total += g.n();
    if (d == 0) d = g.d();
    if (g.d() != d) throw InvalidInput("cluster_features: grids differ in feature dim");
  }
  if (total < c) throw InvalidInput("cluster_features: fewer patches than clusters");
  Matrix x(total, d);
  {
    std::size_t r = 0;
    for (const auto& g : features) {
      const Matrix u = normalize_rows(g.data()).unit;
      for (std::size_t i = 0; i < g.n(); ++i, ++r) std::copy(u.row(i).begin(), u.row(i).end(), x.row(r).begin());
    }
  }
  const std::size_t runs = std::max<std::size_t>(1, opt.restarts);
  std::vector<detail::Lloyd> results(runs);
  parallel_for(runs, [&](std::size_t r) {
    Rng rng = Rng::derive(seed, {0x6b6d656eull, r});
    results[r] = detail::cosine_lloyd(x, c, rng, opt.max_iter);
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs; ++r)
    if (results[r].objective < results[best].objective) best = r;

  ClusterResult out;
  out.centers = std::move(results[best].centers);
  out.objective = results[best].objective;
  out.iterations = results[best].iterations;
  std::size_t r = 0;
  for (const auto& g : features) {
    std::vector<int> labels(g.n());
    for (std::size_t i = 0; i < g.n(); ++i, ++r) labels[i] = int(results[best].assign[r]);
    out.maps.emplace_back(g.h(), g.w(), std::move(labels));
  }
  return out;
}

// counts(g, p): patches with ground truth g predicted p.
struct ConfusionMatrix {
  std::size_t c = 0;
  std::vector<std::uint64_t> counts;

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t classes) : c(classes), counts(classes * classes, 0) {}

  std::uint64_t& at(std::size_t g, std::size_t p) { return counts[g * c + p]; }
  std::uint64_t at(std::size_t g, std::size_t p) const { return counts[g * c + p]; }

  void add(const SegmentMap& gt, const SegmentMap& pred) {
    if (gt.n() != pred.n()) throw InvalidInput("ConfusionMatrix: map sizes differ");
    for (std::size_t i = 0; i < gt.n(); ++i) {
      const auto g = std::size_t(gt.labels[i]), p = std::size_t(pred.labels[i]);
      if (g >= c || p >= c) throw InvalidInput("ConfusionMatrix: label outside class range");
      ++at(g, p);
    }
  }
  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    if (o.c != c) throw InvalidInput("ConfusionMatrix: class counts differ");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
    return *this;
  }
  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto v : counts) t += v;
    return t;
  }
};

namespace detail {

// Minimum-cost perfect assignment on a square integer matrix (Jonker-Volgenant
// style shortest augmenting paths). Returns row -> column.
inline std::vector<std::size_t> min_cost_assignment(const std::vector<std::int64_t>& cost,
                                                    std::size_t n) {
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
  std::vector<std::int64_t> u(n + 1, 0), v(n + 1, 0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      std::int64_t delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const std::int64_t cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

inline std::int64_t assignment_gain(const ConfusionMatrix& cm, const std::vector<std::size_t>& perm) {
  std::int64_t s = 0;
  for (std::size_t g = 0; g < cm.c; ++g) s += std::int64_t(cm.at(g, perm[g]));
  return s;
}

// Best achievable gain with rows [0, fixed.size()) pinned to `fixed`.
inline std::int64_t best_gain_with_prefix(const ConfusionMatrix& cm,
                                          const std::vector<std::size_t>& fixed) {
  const std::size_t c = cm.c, m = c - fixed.size();
  std::int64_t gain = 0;
  std::vector<char> taken(c, 0);
  for (std::size_t g = 0; g < fixed.size(); ++g) {
    gain += std::int64_t(cm.at(g, fixed[g]));
    taken[fixed[g]] = 1;
  }
  if (m == 0) return gain;
  std::vector<std::size_t> cols;
  for (std::size_t p = 0; p < c; ++p)
    if (!taken[p]) cols.push_back(p);
  std::int64_t mx = 0;
  for (auto v : cm.counts) mx = std::max(mx, std::int64_t(v));
  std::vector<std::int64_t> cost(m * m);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) cost[a * m + b] = mx - std::int64_t(cm.at(fixed.size() + a, cols[b]));
  const auto sub = min_cost_assignment(cost, m);
  for (std::size_t a = 0; a < m; ++a) gain += std::int64_t(cm.at(fixed.size() + a, cols[sub[a]]));
  return gain;
}

}  // namespace detail

// perm[g] = predicted label matched to ground-truth class g, maximizing the
// matched count. Among optimal permutations the lexicographically smallest
// is returned.
inline std::vector<std::size_t> hungarian_match(const ConfusionMatrix& cm) {
  const std::size_t c = cm.c;
  if (c == 0) return {};
  const std::int64_t best = detail::best_gain_with_prefix(cm, {});
  std::vector<std::size_t> fixed;
  std::vector<char> taken(c, 0);
  for (std::size_t g = 0; g < c; ++g) {
    for (std::size_t p = 0; p < c; ++p) {
      if (taken[p]) continue;
      fixed.push_back(p);
      if (detail::best_gain_with_prefix(cm, fixed) == best) {
        taken[p] = 1;
        break;
      }
      fixed.pop_back();
    }
  }
  return fixed;
}

struct SegMetrics {
  double acc = 0.0;
  double miou = 0.0;
  std::vector<double> iou;  // per ground-truth class; NaN when absent from GT
};

inline SegMetrics metrics(const ConfusionMatrix& cm, const std::vector<std::size_t>& perm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw InvalidInput("metrics: empty confusion matrix");
  if (perm.size() != cm.c) throw InvalidInput("metrics: permutation size != class count");
  {
    std::vector<char> seen(cm.c, 0);
    for (auto p : perm) {
      if (p >= cm.c || seen[p]) throw InvalidInput("metrics: not a permutation");
      seen[p] = 1;
    }
  }
  std::vector<std::uint64_t> row(cm.c, 0), col(cm.c, 0);
  for (std::size_t g = 0; g < cm.c; ++g)
    for (std::size_t p = 0; p < cm.c; ++p) {
      row[g] += cm.at(g, p);
      col[p] += cm.at(g, p);
    }
  SegMetrics m;
  m.iou.assign(cm.c, std::numeric_limits<double>::quiet_NaN());
  std::uint64_t hit = 0;
  double iou_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t g = 0; g < cm.c; ++g) {
    const std::uint64_t tp = cm.at(g, perm[g]);
    hit += tp;
    if (row[g] == 0) continue;
    m.iou[g] = double(tp) / double(row[g] + col[perm[g]] - tp);
    iou_sum += m.iou[g];
    ++present;
  }
  m.acc = double(hit) / double(total);
  m.miou = present ? iou_sum / double(present) : 0.0;
  return m;
}

inline std::size_t class_count(const std::vector<SamplePair>& data) {
  int mx = -1;
  for (const auto& s : data) {
    if (!s.ground_truth) throw DataError("sample " + s.id + " has no ground truth");
    mx = std::max(mx, s.ground_truth->max_label());
  }
  return std::size_t(mx + 1);
}

struct EvalReport {
  ClusterResult clusters;
  ConfusionMatrix confusion;
  std::vector<std::size_t> perm;
  SegMetrics metrics;
};

// Clusters the given features into `clusters` groups and scores them against
// ground truth. The confusion matrix is padded to max(clusters, classes).
inline EvalReport evaluate_unsupervised(const std::vector<FeatureGrid>& features,
                                        const std::vector<SamplePair>& data, std::size_t clusters,
                                        std::uint64_t seed, const KMeansOptions& opt = {}) {
  if (features.size() != data.size()) throw InvalidInput("evaluate: features/data count differ");
  const std::size_t classes = class_count(data);
  EvalReport r;
  r.clusters = cluster_features(features, clusters, seed, opt);
  r.confusion = ConfusionMatrix(std::max(classes, clusters));
  for (std::size_t i = 0; i < data.size(); ++i) r.confusion.add(*data[i].ground_truth, r.clusters.maps[i]);
  r.perm = hungarian_match(r.confusion);
  r.metrics = metrics(r.confusion, r.perm);
  return r;
}

struct ProbeResult {
  Matrix weights;               // (D + 1) x c, last row is the bias
  std::vector<double> losses;   // mean cross-entropy before each epoch, then after the last
  SegMetrics metrics;
  std::vector<SegmentMap> maps;
};

// Multinomial logistic regression on frozen rows, zero init, full-batch
// gradient descent on the mean softmax cross-entropy.
inline ProbeResult linear_probe(const std::vector<FeatureGrid>& features,
                                const std::vector<SamplePair>& data, std::size_t c,
                                std::size_t epochs, double lr) {
  if (features.size() != data.size()) throw InvalidInput("linear_probe: features/data count differ");
  if (features.empty()) throw InvalidInput("linear_probe: no samples");
  std::size_t total = 0;
  const std::size_t d = features.front().d();
  int first = -1;
  bool multi = false;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data[i].ground_truth) throw DataError("sample " + data[i].id + " has no ground truth");
    total += features[i].n();
    for (int v : data[i].ground_truth->labels) {
      if (std::size_t(v) >= c) throw InvalidInput("linear_probe: label outside class range");
      if (first < 0) first = v;
      else if (v != first) multi = true;
    }
  }
  if (!multi) throw DegenerateInput("linear_probe: ground truth has a single class");

  Matrix x(total, d + 1);
  std::vector<std::size_t> y(total);
  {
    std::size_t r = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
      for (std::size_t p = 0; p < features[i].n(); ++p, ++r) {
        const auto src = features[i].data().row(p);
        std::copy(src.begin(), src.end(), x.row(r).begin());
        x(r, d) = 1.0;
        y[r] = std::size_t(data[i].ground_truth->labels[p]);
      }
  }
  ProbeResult out;
  out.weights = Matrix(d + 1, c);
  auto loss_and_grad = [&](Matrix* grad) {
    const Matrix prob = row_softmax(matmul(x, out.weights));
    double loss = 0.0;
    Matrix g(total, c);
    for (std::size_t r = 0; r < total; ++r) {
      loss -= std::log(std::max(prob(r, y[r]), 1e-300)) / double(total);
      for (std::size_t k = 0; k < c; ++k) g(r, k) = (prob(r, k) - (k == y[r] ? 1.0 : 0.0)) / double(total);
    }
    if (grad) *grad = matmul_tn(x, g);
    return loss;
  };
  for (std::size_t e = 0; e < epochs; ++e) {
    Matrix grad;
    out.losses.push_back(loss_and_grad(&grad));
    grad *= -lr;
    out.weights += grad;
  }
  out.losses.push_back(loss_and_grad(nullptr));

  const Matrix scores = matmul(x, out.weights);
  ConfusionMatrix cm(c);
  std::size_t r = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::vector<int> labels(features[i].n());
    for (std::size_t p = 0; p < labels.size(); ++p, ++r) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < c; ++k)
        if (scores(r, k) > scores(r, best)) best = k;
      labels[p] = int(best);
    }
    out.maps.emplace_back(features[i].h(), features[i].w(), std::move(labels));
    cm.add(*data[i].ground_truth, out.maps.back());
  }
  std::vector<std::size_t> identity(c);
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  out.metrics = metrics(cm, identity);
  return out;
}

// Binary PGM, one byte per patch (two bytes big-endian when c > 256).
inline void write_pgm(const std::filesystem::path& path, const SegmentMap& map, std::size_t c) {
  const std::size_t maxval = std::max<std::size_t>(1, c == 0 ? 1 : c - 1);
  if (maxval > 65535) throw InvalidInput("write_pgm: too many classes for PGM");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P5\n" << map.w << " " << map.h << "\n" << maxval << "\n";
  for (int v : map.labels) {
    const auto u = std::size_t(v);
    if (u > maxval) throw InvalidInput("write_pgm: label exceeds maxval");
    if (maxval > 255) out.put(char((u >> 8) & 0xff));
    out.put(char(u & 0xff));
  }
  if (!out) throw DataError("write failed for " + path.string());
}

// Grayscale PGM of real values min-max scaled to 0..255.
inline void write_scalar_pgm(const std::filesystem::path& path, std::span<const double> v,
                             std::size_t h, std::size_t w) {
  if (v.size() != h * w) throw InvalidInput("write_scalar_pgm: size != h*w");
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double span = *hi - *lo;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P5\n" << w << " " << h << "\n255\n";
  for (double x : v) {
    const double u = span > 0.0 ? (x - *lo) / span : 0.0;
    out.put(char(static_cast<unsigned char>(std::lround(u * 255.0))));
  }
  if (!out) throw DataError("write failed for " + path.string());
}

inline void write_ppm(const std::filesystem::path& path, const SegmentMap& map) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P6\n" << map.w << " " << map.h << "\n255\n";
  for (int v : map.labels) {
    const auto& c = kPalette[std::size_t(v) % kPalette.size()];
    out.put(char(c[0])).put(char(c[1])).put(char(c[2]));
  }
  if (!out) throw DataError("write failed for " + path.string());
}

inline std::string metrics_csv_header(std::size_t c) {
  std::string h = "name,acc,miou";
  for (std::size_t g = 0; g < c; ++g) h += ",iou_" + std::to_string(g);
  return h;
}

inline std::string metrics_csv_row(const std::string& name, const SegMetrics& m) {
  std::string r = name + "," + detail::format_double(m.acc) + "," + detail::format_double(m.miou);
  for (double v : m.iou) r += "," + (std::isnan(v) ? std::string("nan") : detail::format_double(v));
  return r;
}

}  // namespace eicue
