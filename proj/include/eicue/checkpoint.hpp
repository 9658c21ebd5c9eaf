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

// Binary checkpoint of a TrainState. Layout in docs/checkpoint.md; all
// integers and floats are little-endian.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "eicue/error.hpp"
#include "eicue/npy.hpp"
#include "eicue/trainer.hpp"

namespace eicue {

inline constexpr char kCheckpointMagic[8] = {'E', 'I', 'C', 'U', 'E', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::uint64_t fnv1a64(const unsigned char* p, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace detail {

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void f64(double v) { put(v); }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void matrix(const Matrix& m) {
    u64(m.rows());
    u64(m.cols());
    for (double v : m.values()) f64(v);
  }
  std::vector<unsigned char>& bytes() { return buf_; }

 private:
  template <typename T>
  void put(T v) {
    unsigned char tmp[sizeof(T)];
    npy::store_le(tmp, v);
    raw(tmp, sizeof(T));
  }
  std::vector<unsigned char> buf_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<unsigned char>& b, std::size_t end) : b_(b), end_(end) {}

  std::size_t offset() const noexcept { return pos_; }
  void need(std::size_t n, const char* what) {
    if (end_ - pos_ < n) throw FormatError(pos_, std::string("checkpoint truncated in ") + what);
  }
  std::uint32_t u32(const char* what) { return get<std::uint32_t>(what); }
  std::uint64_t u64(const char* what) { return get<std::uint64_t>(what); }
  double f64(const char* what) { return get<double>(what); }
  std::string str(const char* what) {
    const std::uint64_t n = u64(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  Matrix matrix(std::size_t rows, std::size_t cols, const char* what) {
    const std::size_t at = pos_;
    const std::uint64_t r = u64(what), c = u64(what);
    if (r != rows || c != cols)
      throw FormatError(at, std::string(what) + ": shape " + std::to_string(r) + "x" +
                                std::to_string(c) + ", expected " + std::to_string(rows) + "x" +
                                std::to_string(cols));
    need(r * c * 8, what);
    Matrix m(r, c);
    for (double& v : m.values()) v = f64(what);
    return m;
  }

 private:
  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    const T v = npy::load_le<T>(b_.data() + pos_);
    pos_ += sizeof(T);
    return v;
  }
  const std::vector<unsigned char>& b_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace detail

struct Checkpoint {
  TrainState state;
  std::string config_text;
};

inline std::vector<unsigned char> serialize_checkpoint(TrainState& s, const std::string& config_text) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(0);
  w.u64(s.params.d_k());
  w.u64(s.params.d_s());
  w.u64(s.params.d_z());
  w.u64(s.centers.k());
  w.u64(s.centers.classes());
  w.u64(static_cast<std::uint64_t>(s.step));
  w.u64(s.seed);
  w.u64(s.centers_ready ? 1 : 0);
  w.str(config_text);
  for (const auto& t : s.params.tensors()) w.matrix(*t.value);
  w.matrix(s.centers.weights);
  for (Optimizer* opt : {&s.opt_heads, &s.opt_centers}) {
    w.u64(opt->kind() == OptimizerKind::kSgd ? 1 : 0);
    w.u64(opt->steps());
    w.u64(opt->first_moments().size());
    for (std::size_t i = 0; i < opt->first_moments().size(); ++i) {
      w.matrix(opt->first_moments()[i]);
      w.matrix(opt->second_moments()[i]);
    }
  }
  auto& bytes = w.bytes();
  const std::uint64_t sum = fnv1a64(bytes.data(), bytes.size());
  w.u64(sum);
  return std::move(w.bytes());
}

// `cfg` supplies the Adam hyperparameters, which are config, not state.
inline Checkpoint parse_checkpoint(const std::vector<unsigned char>& bytes, const AdamConfig& adam = {}) {
  if (bytes.size() < sizeof kCheckpointMagic + 8 ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
    throw FormatError(0, "not a checkpoint (bad magic)");
  const std::size_t body = bytes.size() - 8;
  Checkpoint out;
  detail::ByteReader rr(bytes, body);
  for (int i = 0; i < 2; ++i) rr.u32("magic");
  const std::size_t ver_at = rr.offset();
  const std::uint32_t version = rr.u32("version");
  if (version != kCheckpointVersion)
    throw FormatError(ver_at, "checkpoint version " + std::to_string(version) + ", expected " +
                                  std::to_string(kCheckpointVersion));
  rr.u32("reserved");
  const std::uint64_t stored = npy::load_le<std::uint64_t>(bytes.data() + body);
  if (fnv1a64(bytes.data(), body) != stored) throw FormatError(body, "checkpoint checksum mismatch");

  const std::size_t d_k = rr.u64("dims"), d_s = rr.u64("dims"), d_z = rr.u64("dims");
  const std::size_t k = rr.u64("dims"), c = rr.u64("dims");
  TrainState& s = out.state;
  s.step = static_cast<std::int64_t>(rr.u64("step"));
  s.seed = rr.u64("seed");
  s.centers_ready = rr.u64("flags") != 0;
  out.config_text = rr.str("config");
  s.params = HeadParams(d_k, d_s, d_z);
  for (const auto& t : s.params.tensors()) *t.value = rr.matrix(t.value->rows(), t.value->cols(), "head tensor");
  // Stored columns are already unit norm; renormalizing would perturb the last bits.
  s.centers.weights = rr.matrix(k, c, "centers");
  s.centers.grad = Matrix(k, c);
  std::vector<Matrix*> head_shapes;
  for (const auto& t : s.params.tensors()) head_shapes.push_back(t.value);
  std::vector<Matrix*> center_shapes = {&s.centers.weights};
  for (int which = 0; which < 2; ++which) {
    const std::uint64_t kind = rr.u64("optimizer");
    Optimizer opt(kind == 1 ? OptimizerKind::kSgd : OptimizerKind::kAdam, adam);
    opt.set_steps(rr.u64("optimizer"));
    const std::size_t at = rr.offset();
    const std::uint64_t count = rr.u64("optimizer");
    const auto& shapes = which == 0 ? head_shapes : center_shapes;
    if (count != 0 && count != shapes.size())
      throw FormatError(at, "optimizer moment count " + std::to_string(count) + " does not match");
    for (std::uint64_t i = 0; i < count; ++i) {
      opt.first_moments().push_back(rr.matrix(shapes[i]->rows(), shapes[i]->cols(), "moment"));
      opt.second_moments().push_back(rr.matrix(shapes[i]->rows(), shapes[i]->cols(), "moment"));
    }
    (which == 0 ? s.opt_heads : s.opt_centers) = std::move(opt);
  }
  if (rr.offset() != body) throw FormatError(rr.offset(), "trailing bytes before checksum");
  return out;
}

inline void save_checkpoint(TrainState& s, const std::string& config_text,
                            const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(s, config_text);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw DataError("short write to checkpoint " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path, const AdamConfig& adam = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes, adam);
}

}  // namespace eicue
