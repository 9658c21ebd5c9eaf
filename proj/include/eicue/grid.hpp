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

// Patch-grid value types shared by every module. A grid of h x w patches is
// flattened row-major: patch index i = row * w + col.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "eicue/error.hpp"
#include "eicue/linalg.hpp"

namespace eicue {

constexpr std::size_t patch_index(std::size_t row, std::size_t col, std::size_t width) {
  return row * width + col;
}

struct PatchCoord {
  std::size_t row;
  std::size_t col;
};

constexpr PatchCoord patch_coord(std::size_t index, std::size_t width) {
  return {index / width, index % width};
}

// h x w grid of d-dimensional patch features, stored as an N x d matrix.
class FeatureGrid {
 public:
  FeatureGrid() = default;
  FeatureGrid(std::size_t h, std::size_t w, Matrix data) : h_(h), w_(w), data_(std::move(data)) {
    if (h_ == 0 || w_ == 0) throw InvalidInput("FeatureGrid: grid dims must be positive");
    if (data_.rows() != h_ * w_) throw InvalidInput("FeatureGrid: row count != h*w");
    if (data_.cols() == 0) throw InvalidInput("FeatureGrid: channel dim must be positive");
    if (!data_.all_finite()) throw InvalidInput("FeatureGrid: non-finite value");
  }

  std::size_t h() const noexcept { return h_; }
  std::size_t w() const noexcept { return w_; }
  std::size_t d() const noexcept { return data_.cols(); }
  std::size_t n() const noexcept { return data_.rows(); }

  const Matrix& data() const noexcept { return data_; }
  std::span<const double> at(std::size_t row, std::size_t col) const {
    return data_.row(patch_index(row, col, w_));
  }

  bool same_shape(const FeatureGrid& o) const {
    return h_ == o.h_ && w_ == o.w_ && d() == o.d();
  }

 private:
  std::size_t h_ = 0;
  std::size_t w_ = 0;
  Matrix data_;
};

// Image resized to patch resolution; rgb is N x 3 with channels in [0, 1].
class PatchImage {
 public:
  PatchImage() = default;
  PatchImage(std::size_t h, std::size_t w, Matrix rgb) : h_(h), w_(w), rgb_(std::move(rgb)) {
    if (h_ == 0 || w_ == 0) throw InvalidInput("PatchImage: grid dims must be positive");
    if (rgb_.rows() != h_ * w_ || rgb_.cols() != 3)
      throw InvalidInput("PatchImage: expected (h*w) x 3 values");
    if (!rgb_.all_finite()) throw InvalidInput("PatchImage: non-finite value");
    for (double& v : rgb_.values()) v = std::clamp(v, 0.0, 1.0);
  }

  std::size_t h() const noexcept { return h_; }
  std::size_t w() const noexcept { return w_; }
  std::size_t n() const noexcept { return h_ * w_; }
  const Matrix& rgb() const noexcept { return rgb_; }

 private:
  std::size_t h_ = 0;
  std::size_t w_ = 0;
  Matrix rgb_;
};

// Per-patch integer labels (EiCue maps, predictions, ground truth).
struct SegmentMap {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<int> labels;

  SegmentMap() = default;
  SegmentMap(std::size_t h_, std::size_t w_, std::vector<int> l)
      : h(h_), w(w_), labels(std::move(l)) {
    if (labels.size() != h * w) throw InvalidInput("SegmentMap: label count != h*w");
    for (int v : labels)
      if (v < 0) throw InvalidInput("SegmentMap: negative label");
  }

  std::size_t n() const noexcept { return labels.size(); }
  int max_label() const {
    return labels.empty() ? -1 : *std::max_element(labels.begin(), labels.end());
  }
  bool operator==(const SegmentMap&) const = default;
};

// Base view K, photometrically augmented view K~, the patch-resolution image
// and optional ground truth.
struct SamplePair {
  std::string id;
  FeatureGrid base;
  FeatureGrid aug;
  PatchImage image;
  std::optional<SegmentMap> ground_truth;

  void validate() const {
    if (!base.same_shape(aug))
      throw InvalidInput("SamplePair " + id + ": base and aug shapes differ");
    if (image.h() != base.h() || image.w() != base.w())
      throw InvalidInput("SamplePair " + id + ": image grid differs from features");
    if (ground_truth && (ground_truth->h != base.h() || ground_truth->w != base.w()))
      throw InvalidInput("SamplePair " + id + ": ground truth grid differs from features");
  }
};

}  // namespace eicue
