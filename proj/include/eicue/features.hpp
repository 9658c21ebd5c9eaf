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

// Feature-grid ingestion (NPY files), image-to-patch resizing, synthetic
// scenes and the on-disk dataset layout:
//
//   <dir>/index.txt          one sample id per line
//   <dir>/<id>.k.npy         base features      <f4 (h, w, d)
//   <dir>/<id>.kaug.npy      augmented features <f4 (h, w, d)
//   <dir>/<id>.img.npy       patch image        <f4 (h, w, 3), values in [0, 1]
//   <dir>/<id>.gt.npy        ground truth       <i4 (h, w), optional

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "eicue/error.hpp"
#include "eicue/grid.hpp"
#include "eicue/linalg.hpp"
#include "eicue/npy.hpp"
#include "eicue/rng.hpp"

namespace eicue {

namespace detail {

inline npy::Array float_array(std::vector<std::size_t> shape, const Matrix& m) {
  npy::Array a{"<f4", std::move(shape), std::vector<unsigned char>(m.size() * 4)};
  const auto v = m.values();
  for (std::size_t i = 0; i < v.size(); ++i)
    npy::store_le<float>(a.payload.data() + 4 * i, static_cast<float>(v[i]));
  return a;
}

inline Matrix float_payload(const npy::Array& a, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  auto v = m.values();
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = static_cast<double>(npy::load_le<float>(a.payload.data() + 4 * i));
  return m;
}

inline void require_float3(const npy::Array& a, const std::string& what) {
  if (a.descr != "<f4")
    throw FormatError(npy::kPreludeSize, what + ": expected dtype <f4, found " + a.descr);
  if (a.shape.size() != 3)
    throw FormatError(npy::kPreludeSize, what + ": expected shape (h, w, d), found " +
                                             std::to_string(a.shape.size()) + " dims");
  for (auto s : a.shape)
    if (s == 0) throw FormatError(npy::kPreludeSize, what + ": zero-sized dimension");
}

}  // namespace detail

inline FeatureGrid load_tensor_file(const std::filesystem::path& path) {
  const npy::Array a = npy::read(path);
  detail::require_float3(a, path.string());
  Matrix m = detail::float_payload(a, a.shape[0] * a.shape[1], a.shape[2]);
  if (!m.all_finite()) throw FormatError(npy::kPreludeSize, path.string() + ": non-finite value");
  return FeatureGrid(a.shape[0], a.shape[1], std::move(m));
}

inline void write_tensor_file(const std::filesystem::path& path, const FeatureGrid& g) {
  npy::write(path, detail::float_array({g.h(), g.w(), g.d()}, g.data()));
}

inline PatchImage load_patch_image(const std::filesystem::path& path) {
  const npy::Array a = npy::read(path);
  detail::require_float3(a, path.string());
  if (a.shape[2] != 3)
    throw FormatError(npy::kPreludeSize, path.string() + ": patch image needs 3 channels");
  Matrix m = detail::float_payload(a, a.shape[0] * a.shape[1], 3);
  if (!m.all_finite()) throw FormatError(npy::kPreludeSize, path.string() + ": non-finite value");
  return PatchImage(a.shape[0], a.shape[1], std::move(m));
}

inline void write_patch_image(const std::filesystem::path& path, const PatchImage& img) {
  npy::write(path, detail::float_array({img.h(), img.w(), 3}, img.rgb()));
}

inline SegmentMap load_label_file(const std::filesystem::path& path) {
  const npy::Array a = npy::read(path);
  if (a.descr != "<i4")
    throw FormatError(npy::kPreludeSize, path.string() + ": expected dtype <i4, found " + a.descr);
  if (a.shape.size() != 2 || a.shape[0] == 0 || a.shape[1] == 0)
    throw FormatError(npy::kPreludeSize, path.string() + ": expected shape (h, w)");
  std::vector<int> labels(a.element_count());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = npy::load_le<std::int32_t>(a.payload.data() + 4 * i);
    if (labels[i] < 0) throw FormatError(npy::kPreludeSize, path.string() + ": negative label");
  }
  return SegmentMap(a.shape[0], a.shape[1], std::move(labels));
}

inline void write_label_file(const std::filesystem::path& path, const SegmentMap& map) {
  npy::Array a{"<i4", {map.h, map.w}, std::vector<unsigned char>(map.n() * 4)};
  for (std::size_t i = 0; i < map.n(); ++i)
    npy::store_le<std::int32_t>(a.payload.data() + 4 * i, map.labels[i]);
  npy::write(path, a);
}

// Full-resolution RGB image, height x width x 3 interleaved, values in [0, 1].
struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;
};

// Area-averaging downsample to an h x w patch grid. Source pixels that
// straddle a patch boundary contribute in proportion to their overlap.
inline PatchImage resize_image_to_patches(const RgbImage& img, std::size_t h, std::size_t w) {
  if (h == 0 || w == 0) throw InvalidInput("resize_image_to_patches: zero-sized target");
  if (img.pixels.size() != img.height * img.width * 3)
    throw InvalidInput("resize_image_to_patches: pixel buffer size mismatch");
  if (img.height < h || img.width < w)
    throw InvalidInput("resize_image_to_patches: target larger than source (upscaling)");

  // Overlap weights of source index s with target cell t along one axis.
  auto axis_weights = [](std::size_t src, std::size_t dst) {
    std::vector<std::vector<std::pair<std::size_t, double>>> out(dst);
    const double step = static_cast<double>(src) / static_cast<double>(dst);
    for (std::size_t t = 0; t < dst; ++t) {
      const double lo = t * step, hi = (t + 1) * step;
      for (auto s = static_cast<std::size_t>(std::floor(lo)); s < src && s < hi; ++s) {
        const double overlap = std::min(hi, s + 1.0) - std::max(lo, static_cast<double>(s));
        if (overlap > 0) out[t].emplace_back(s, overlap / step);
      }
    }
    return out;
  };
  const auto wr = axis_weights(img.height, h);
  const auto wc = axis_weights(img.width, w);

  Matrix rgb(h * w, 3);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      auto out = rgb.row(patch_index(r, c, w));
      for (const auto& [sr, fr] : wr[r]) {
        for (const auto& [sc, fc] : wc[c]) {
          const double* px = &img.pixels[(sr * img.width + sc) * 3];
          for (int ch = 0; ch < 3; ++ch) out[ch] += fr * fc * px[ch];
        }
      }
    }
  }
  return PatchImage(h, w, std::move(rgb));
}

// ---------------------------------------------------------------------------
// Synthetic scenes

inline constexpr std::array<std::array<unsigned char, 3>, 27> kPalette = {{
    {230, 25, 75},   {60, 180, 75},   {0, 130, 200},   {255, 225, 25},  {245, 130, 48},
    {145, 30, 180},  {70, 240, 240},  {240, 50, 230},  {210, 245, 60},  {250, 190, 212},
    {0, 128, 128},   {220, 190, 255}, {170, 110, 40},  {255, 250, 200}, {128, 0, 0},
    {170, 255, 195}, {128, 128, 0},   {255, 215, 180}, {0, 0, 128},     {128, 128, 128},
    {255, 255, 255}, {0, 0, 0},       {100, 149, 237}, {255, 99, 71},   {46, 139, 87},
    {218, 165, 32},  {147, 112, 219},
}};

struct SceneSpec {
  std::string id = "scene";
  std::size_t h = 16;
  std::size_t w = 16;
  std::size_t d = 32;
  std::size_t objects = 3;
  double noise = 0.05;       // per-channel feature noise sigma
  double aug_jitter = 0.05;  // per-channel gain/offset sigma of the augmented view
  std::uint64_t seed = 0;    // layout and noise
  std::uint64_t palette_seed = 0;  // class means, shared across a dataset
};

// Unit-norm class means; mutually orthogonal when count <= d.
inline std::vector<std::vector<double>> class_means(std::size_t count, std::size_t d,
                                                    std::uint64_t palette_seed) {
  Rng rng = Rng::derive(palette_seed, {0x6d65616eull});
  std::vector<std::vector<double>> means;
  for (std::size_t c = 0; c < count; ++c) {
    std::vector<double> v(d);
    for (double& x : v) x = rng.normal();
    if (c < d) {
      for (const auto& u : means) {
        const double p = dot(v, u);
        for (std::size_t j = 0; j < d; ++j) v[j] -= p * u[j];
      }
    }
    const double nrm = norm2(v);
    for (double& x : v) x /= nrm;
    means.push_back(std::move(v));
  }
  return means;
}

inline std::array<double, 3> class_color(std::size_t c) {
  const auto& p = kPalette[c % kPalette.size()];
  return {p[0] / 255.0, p[1] / 255.0, p[2] / 255.0};
}

// Voronoi layout of `objects` regions over the grid; every region is
// nonempty because each seed patch is nearest to itself.
inline SegmentMap synth_layout(std::size_t h, std::size_t w, std::size_t objects, Rng& rng) {
  const std::size_t n = h * w;
  if (objects == 0) throw InvalidInput("synth_layout: object count must be >= 1");
  if (objects > n) throw InvalidInput("synth_layout: more objects than patches");
  std::vector<std::size_t> cells(n);
  std::iota(cells.begin(), cells.end(), std::size_t{0});
  rng.shuffle(cells);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto pc = patch_coord(i, w);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t o = 0; o < objects; ++o) {
      const auto sc = patch_coord(cells[o], w);
      const double dr = double(pc.row) - double(sc.row), dc = double(pc.col) - double(sc.col);
      const double dist = dr * dr + dc * dc;
      if (dist < best) {
        best = dist;
        labels[i] = static_cast<int>(o);
      }
    }
  }
  return SegmentMap(h, w, std::move(labels));
}

// Deterministic synthetic sample. Object o carries class o; the augmented
// view applies a per-channel gain and offset and never moves patches.
inline SamplePair synth_scene(const SceneSpec& spec) {
  if (spec.objects == 0) throw InvalidInput("synth_scene: object count must be >= 1");
  if (spec.noise < 0 || spec.aug_jitter < 0) throw InvalidInput("synth_scene: negative sigma");
  Rng rng = Rng::derive(spec.seed, {0x73636e65ull});
  SegmentMap truth = synth_layout(spec.h, spec.w, spec.objects, rng);
  const auto means = class_means(spec.objects, spec.d, spec.palette_seed);
  const std::size_t n = spec.h * spec.w;

  Matrix base(n, spec.d), img(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = static_cast<std::size_t>(truth.labels[i]);
    auto row = base.row(i);
    for (std::size_t c = 0; c < spec.d; ++c) row[c] = means[label][c] + spec.noise * rng.normal();
    const auto color = class_color(label);
    for (int ch = 0; ch < 3; ++ch) img(i, ch) = color[ch] + 0.5 * spec.noise * rng.normal();
  }
  std::vector<double> gain(spec.d), offset(spec.d);
  for (std::size_t c = 0; c < spec.d; ++c) {
    gain[c] = 1.0 + spec.aug_jitter * rng.normal();
    offset[c] = spec.aug_jitter * rng.normal();
  }
  Matrix aug(n, spec.d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < spec.d; ++c) aug(i, c) = base(i, c) * gain[c] + offset[c];

  SamplePair out{spec.id, FeatureGrid(spec.h, spec.w, std::move(base)),
                 FeatureGrid(spec.h, spec.w, std::move(aug)),
                 PatchImage(spec.h, spec.w, std::move(img)), std::move(truth)};
  return out;
}

inline std::string sample_id(std::size_t i) {
  std::string s = std::to_string(i);
  return "s" + std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

// `count` scenes sharing class means; sample i uses layout seed derived from
// (seed, i).
inline std::vector<SamplePair> synth_dataset(std::size_t count, SceneSpec spec,
                                             std::uint64_t seed) {
  std::vector<SamplePair> out;
  out.reserve(count);
  spec.palette_seed = seed;
  for (std::size_t i = 0; i < count; ++i) {
    spec.id = sample_id(i);
    spec.seed = Rng::derive(seed, {0x73616d70ull, i}).next();
    out.push_back(synth_scene(spec));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset directory layout

inline void write_dataset(const std::filesystem::path& dir, const std::vector<SamplePair>& samples) {
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / "index.txt", std::ios::trunc);
  if (!index) throw DataError("cannot write " + (dir / "index.txt").string());
  for (const auto& s : samples) {
    s.validate();
    write_tensor_file(dir / (s.id + ".k.npy"), s.base);
    write_tensor_file(dir / (s.id + ".kaug.npy"), s.aug);
    write_patch_image(dir / (s.id + ".img.npy"), s.image);
    if (s.ground_truth) write_label_file(dir / (s.id + ".gt.npy"), *s.ground_truth);
    index << s.id << '\n';
  }
}

inline std::vector<std::string> read_index(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("data directory not found: " + dir.string());
  std::ifstream in(dir / "index.txt");
  if (!in) throw DataError("missing index.txt in " + dir.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    std::size_t start = 0;
    while (start < line.size() && std::isspace(static_cast<unsigned char>(line[start]))) ++start;
    line = line.substr(start);
    if (line.empty() || line[0] == '#') continue;
    ids.push_back(line);
  }
  if (ids.empty()) throw DataError("index.txt lists no samples in " + dir.string());
  return ids;
}

inline SamplePair load_sample(const std::filesystem::path& dir, const std::string& id) {
  auto need = [&](const std::string& suffix) {
    auto p = dir / (id + suffix);
    if (!std::filesystem::exists(p)) throw DataError("missing file " + p.string());
    return p;
  };
  SamplePair s{id, load_tensor_file(need(".k.npy")), load_tensor_file(need(".kaug.npy")),
               load_patch_image(need(".img.npy")), std::nullopt};
  const auto gt = dir / (id + ".gt.npy");
  if (std::filesystem::exists(gt)) s.ground_truth = load_label_file(gt);
  try {
    s.validate();
  } catch (const InvalidInput& e) {
    throw DataError(e.what());
  }
  return s;
}

inline std::vector<SamplePair> load_dataset(const std::filesystem::path& dir) {
  std::vector<SamplePair> out;
  for (const auto& id : read_index(dir)) out.push_back(load_sample(dir, id));
  for (const auto& s : out) {
    if (!s.base.same_shape(out.front().base))
      throw DataError("sample " + s.id + " has a different feature shape than " + out.front().id);
  }
  return out;
}

}  // namespace eicue
