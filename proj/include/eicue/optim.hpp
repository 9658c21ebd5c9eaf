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
#include <cstdint>
#include <string>
#include <vector>

#include "eicue/error.hpp"
#include "eicue/linalg.hpp"

namespace eicue {

enum class OptimizerKind { kAdam, kSgd };

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::kAdam;
  if (s == "sgd") return OptimizerKind::kSgd;
  throw InvalidInput("unknown optimizer '" + s + "' (adam|sgd)");
}

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam or plain SGD over a fixed list of tensors. Moment buffers are created
// on the first step and keyed by position.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerKind kind, AdamConfig cfg) : kind_(kind), cfg_(cfg) {}

  OptimizerKind kind() const noexcept { return kind_; }
  std::uint64_t steps() const noexcept { return t_; }

  void step(const std::vector<Matrix*>& values, const std::vector<const Matrix*>& grads,
            double lr) {
    if (values.size() != grads.size()) throw InvalidInput("Optimizer: value/grad count differs");
    if (kind_ == OptimizerKind::kSgd) {
      for (std::size_t t = 0; t < values.size(); ++t) {
        auto v = values[t]->values();
        auto g = grads[t]->values();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
      }
      ++t_;
      return;
    }
    if (m_.empty()) {
      for (const Matrix* v : values) {
        m_.emplace_back(v->rows(), v->cols());
        v_.emplace_back(v->rows(), v->cols());
      }
    }
    if (m_.size() != values.size()) throw InvalidState("Optimizer: tensor list changed");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (std::size_t t = 0; t < values.size(); ++t) {
      auto p = values[t]->values();
      auto g = grads[t]->values();
      auto m = m_[t].values();
      auto v = v_[t].values();
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
      }
    }
  }

  // Moment buffers and step count, for checkpointing.
  std::vector<Matrix>& first_moments() { return m_; }
  std::vector<Matrix>& second_moments() { return v_; }
  void set_steps(std::uint64_t t) { t_ = t; }

 private:
  OptimizerKind kind_ = OptimizerKind::kAdam;
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<Matrix> m_, v_;
};

}  // namespace eicue
