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

// Training configuration and its flat `key = value` text form. Lines are
// UTF-8, `#` starts a comment, blank lines are ignored, and every field of
// TrainConfig is addressable by its name.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <vector>

#include "eicue/affinity.hpp"
#include "eicue/distill.hpp"
#include "eicue/error.hpp"
#include "eicue/objnce.hpp"
#include "eicue/optim.hpp"

namespace eicue {

enum class RampShape { kLinear, kCosine, kExponential };

struct TrainConfig {
  double lambda_obj = 0.3;
  double lambda_sc = 0.7;
  double lambda_nce_target = 0.9;
  double lambda_eig = 1.0;
  std::int64_t ramp_steps = 200;
  RampShape ramp_shape = RampShape::kLinear;
  double tau = 0.1;
  double lr_heads = 0.0005;
  double lr_centers = 0.00005;
  double lr_proto = 0.0;  // accepted for completeness; prototypes are medoids
  std::int64_t batch_size = 8;
  std::int64_t max_steps = 1000;
  std::uint64_t seed = 0;
  AffinityConfig affinity;
  std::int64_t k_eigenvectors = 4;
  std::int64_t c_classes = 27;
  std::int64_t d_s = 512;
  std::int64_t d_z = 512;
  double dropout = 0.1;
  double k_shift = 0.0;
  double v_shift = 3.5;
  CorrReduction corr_reduction = CorrReduction::kMean;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  AdamConfig adam;
  PrototypeMethod prototype = PrototypeMethod::kMedoid;
  bool clamp_obj_weights = false;
  std::int64_t checkpoint_every = 0;  // 0: final checkpoint only

  DistillConfig distill() const { return {k_shift, v_shift, corr_reduction}; }

  // Throws ConfigError (line 0) on out-of-range values.
  void validate() const {
    auto need = [](bool ok, const std::string& what) {
      if (!ok) throw ConfigError(0, what);
    };
    need(lambda_nce_target >= 0.0 && lambda_nce_target <= 1.0, "lambda_nce_target must be in [0, 1]");
    need(lambda_eig >= 0.0 && lambda_eig <= 1.0, "lambda_eig must be in [0, 1]");
    need(lambda_obj > 0.0 && lambda_obj < 1.0, "lambda_obj must be in (0, 1)");
    need(lambda_sc > 0.0 && lambda_sc < 1.0, "lambda_sc must be in (0, 1)");
    need(ramp_steps >= 1, "ramp_steps must be >= 1");
    need(tau > 0.0, "tau must be > 0");
    need(lr_heads >= 0.0 && lr_centers >= 0.0 && lr_proto >= 0.0, "learning rates must be >= 0");
    need(batch_size >= 1, "batch_size must be >= 1");
    need(max_steps >= 0, "max_steps must be >= 0");
    need(k_eigenvectors >= 1, "k_eigenvectors must be >= 1");
    need(c_classes >= 1, "c_classes must be >= 1");
    need(d_s >= 1 && d_z >= 1, "d_s and d_z must be >= 1");
    need(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
    need(affinity.sigma_c > 0.0, "affinity.sigma_c must be > 0");
    need(affinity.ridge >= 0.0, "affinity.ridge must be >= 0");
    need(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0,
         "adam betas must be in [0, 1)");
    need(adam.eps > 0.0, "adam.eps must be > 0");
    need(checkpoint_every >= 0, "checkpoint_every must be >= 0");
  }

  std::vector<std::string> warnings() const {
    std::vector<std::string> out;
    if (lr_proto != 0.0)
      out.push_back("lr_proto is unused: prototypes are medoids of Z, not free parameters");
    return out;
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view v, std::size_t line, const std::string& key) {
  T out{};
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError(line, key + ": '" + std::string(v) + "' is not a valid number");
  return out;
}

inline bool parse_bool(std::string_view v, std::size_t line, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(line, key + ": '" + std::string(v) + "' is not a boolean (true|false)");
}

struct Field {
  std::string name;
  std::function<void(TrainConfig&, std::string_view, std::size_t)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename M>
Field number_field(std::string name, M TrainConfig::*member) {
  using T = std::remove_reference_t<decltype(std::declval<TrainConfig&>().*member)>;
  return {name,
          [member, name](TrainConfig& c, std::string_view v, std::size_t line) {
            c.*member = parse_number<T>(v, line, name);
          },
          [member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*member);
            else return std::to_string(c.*member);
          }};
}

template <typename T, typename Parse, typename Show>
Field enum_field(std::string name, T TrainConfig::*member, Parse parse, Show show) {
  return {name,
          [member, name, parse](TrainConfig& c, std::string_view v, std::size_t line) {
            try {
              c.*member = parse(std::string(v));
            } catch (const InvalidInput& e) {
              throw ConfigError(line, name + ": " + e.what());
            }
          },
          [member, show](const TrainConfig& c) { return std::string(show(c.*member)); }};
}

inline Field double_ref(std::string name, std::function<double&(TrainConfig&)> ref) {
  return {name,
          [ref, name](TrainConfig& c, std::string_view v, std::size_t line) {
            ref(c) = parse_number<double>(v, line, name);
          },
          [ref](const TrainConfig& c) { return format_double(ref(const_cast<TrainConfig&>(c))); }};
}

inline RampShape parse_ramp(const std::string& s) {
  if (s == "linear") return RampShape::kLinear;
  if (s == "cosine") return RampShape::kCosine;
  if (s == "exponential") return RampShape::kExponential;
  throw InvalidInput("unknown ramp shape '" + s + "' (linear|cosine|exponential)");
}

inline const char* ramp_name(RampShape r) {
  switch (r) {
    case RampShape::kCosine: return "cosine";
    case RampShape::kExponential: return "exponential";
    default: return "linear";
  }
}

inline const std::vector<Field>& config_fields() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    f.push_back(number_field("lambda_obj", &TrainConfig::lambda_obj));
    f.push_back(number_field("lambda_sc", &TrainConfig::lambda_sc));
    f.push_back(number_field("lambda_nce_target", &TrainConfig::lambda_nce_target));
    f.push_back(number_field("lambda_eig", &TrainConfig::lambda_eig));
    f.push_back(number_field("ramp_steps", &TrainConfig::ramp_steps));
    f.push_back(enum_field("ramp_shape", &TrainConfig::ramp_shape, parse_ramp, ramp_name));
    f.push_back(number_field("tau", &TrainConfig::tau));
    f.push_back(number_field("lr_heads", &TrainConfig::lr_heads));
    f.push_back(number_field("lr_centers", &TrainConfig::lr_centers));
    f.push_back(number_field("lr_proto", &TrainConfig::lr_proto));
    f.push_back(number_field("batch_size", &TrainConfig::batch_size));
    f.push_back(number_field("max_steps", &TrainConfig::max_steps));
    f.push_back(number_field("seed", &TrainConfig::seed));
    f.push_back(double_ref("affinity.sigma_c",
                           [](TrainConfig& c) -> double& { return c.affinity.sigma_c; }));
    f.push_back({"affinity.radius",
                 [](TrainConfig& c, std::string_view v, std::size_t line) {
                   c.affinity.radius = parse_number<std::size_t>(v, line, "affinity.radius");
                 },
                 [](const TrainConfig& c) { return std::to_string(c.affinity.radius); }});
    f.push_back({"affinity.clamp_negative",
                 [](TrainConfig& c, std::string_view v, std::size_t line) {
                   c.affinity.clamp_negative = parse_bool(v, line, "affinity.clamp_negative");
                 },
                 [](const TrainConfig& c) {
                   return std::string(c.affinity.clamp_negative ? "true" : "false");
                 }});
    f.push_back(double_ref("affinity.ridge",
                           [](TrainConfig& c) -> double& { return c.affinity.ridge; }));
    f.push_back(number_field("k_eigenvectors", &TrainConfig::k_eigenvectors));
    f.push_back(number_field("c_classes", &TrainConfig::c_classes));
    f.push_back(number_field("d_s", &TrainConfig::d_s));
    f.push_back(number_field("d_z", &TrainConfig::d_z));
    f.push_back(number_field("dropout", &TrainConfig::dropout));
    f.push_back(number_field("k_shift", &TrainConfig::k_shift));
    f.push_back(number_field("v_shift", &TrainConfig::v_shift));
    f.push_back(enum_field("corr_reduction", &TrainConfig::corr_reduction, parse_corr_reduction,
                           [](CorrReduction r) { return r == CorrReduction::kSum ? "sum" : "mean"; }));
    f.push_back(enum_field("optimizer", &TrainConfig::optimizer, parse_optimizer,
                           [](OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }));
    f.push_back(double_ref("adam.beta1", [](TrainConfig& c) -> double& { return c.adam.beta1; }));
    f.push_back(double_ref("adam.beta2", [](TrainConfig& c) -> double& { return c.adam.beta2; }));
    f.push_back(double_ref("adam.eps", [](TrainConfig& c) -> double& { return c.adam.eps; }));
    f.push_back(enum_field("prototype", &TrainConfig::prototype, parse_prototype_method,
                           [](PrototypeMethod m) {
                             return m == PrototypeMethod::kCentroid ? "centroid"
                                    : m == PrototypeMethod::kPca    ? "pca"
                                                                    : "medoid";
                           }));
    f.push_back({"clamp_obj_weights",
                 [](TrainConfig& c, std::string_view v, std::size_t line) {
                   c.clamp_obj_weights = parse_bool(v, line, "clamp_obj_weights");
                 },
                 [](const TrainConfig& c) {
                   return std::string(c.clamp_obj_weights ? "true" : "false");
                 }});
    f.push_back(number_field("checkpoint_every", &TrainConfig::checkpoint_every));
    return f;
  }();
  return fields;
}

}  // namespace detail

// Applies `text` on top of `base`. Unknown keys, duplicates, missing `=` and
// unparsable values raise ConfigError with the 1-based line number; range
// checks run afterwards.
inline TrainConfig parse_config(std::string_view text, TrainConfig base = {}) {
  const auto& fields = detail::config_fields();
  std::set<std::string> seen;
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(line_no, "expected 'key = value', got '" + std::string(line) + "'");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(line_no, "empty key");
    if (value.empty()) throw ConfigError(line_no, key + ": empty value");
    const auto it = std::find_if(fields.begin(), fields.end(),
                                 [&](const detail::Field& f) { return f.name == key; });
    if (it == fields.end()) throw ConfigError(line_no, "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(line_no, "duplicate key '" + key + "'");
    it->set(base, value, line_no);
  }
  base.validate();
  return base;
}

inline TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(0, "cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

// Every field, one `key = value` per line, in a stable order. parse_config
// of the result reproduces the config exactly.
inline std::string config_to_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& f : detail::config_fields()) out += f.name + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace eicue
