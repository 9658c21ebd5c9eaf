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

// Subcommands of the `eicue` tool. Each returns a process exit code:
//   0 ok, 2 config/usage, 3 data, 4 degenerate input, 5 numerical failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "eicue/affinity.hpp"
#include "eicue/checkpoint.hpp"
#include "eicue/config.hpp"
#include "eicue/error.hpp"
#include "eicue/evaluator.hpp"
#include "eicue/features.hpp"
#include "eicue/spectral.hpp"
#include "eicue/trainer.hpp"

namespace eicue::cli {

enum ExitCode : int { kOk = 0, kConfig = 2, kData = 3, kDegenerate = 4, kNumerical = 5 };

inline int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kConfig:
    case ErrorKind::kInvalidInput:
    case ErrorKind::kInvalidState: return kConfig;
    case ErrorKind::kFormat:
    case ErrorKind::kData: return kData;
    case ErrorKind::kDegenerateGraph:
    case ErrorKind::kDegenerateInput:
    case ErrorKind::kDegenerateContrast:
    case ErrorKind::kSkipTerm: return kDegenerate;
    case ErrorKind::kNumericalFailure: return kNumerical;
  }
  return kConfig;
}

// Runs `body`, mapping library errors to exit codes and printing them.
inline int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
}

// Any failure while reading the data directory is a data error.
inline std::vector<SamplePair> load_data(const std::filesystem::path& dir) {
  try {
    return load_dataset(dir);
  } catch (const DataError&) {
    throw;
  } catch (const Error& e) {
    throw DataError(std::string("reading ") + dir.string() + ": " + e.what());
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

inline void prepare_out_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw DataError("cannot create output directory " + dir.string());
}

// ---------------------------------------------------------------------------

struct SynthOptions {
  std::filesystem::path out;
  std::size_t count = 40;
  std::size_t objects = 4;
  std::size_t h = 16, w = 16, d = 32;
  double noise = 0.05;
  double aug_jitter = 0.05;
  std::uint64_t seed = 0;
  bool force = false;
};

inline int cmd_synth(const SynthOptions& o, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    if (o.count == 0) throw InvalidInput("synth: --count must be >= 1");
    if (std::filesystem::exists(o.out / "index.txt") && !o.force)
      throw ConfigError(0, "synth: " + (o.out / "index.txt").string() +
                               " exists; pass --force to overwrite");
    prepare_out_dir(o.out);
    SceneSpec spec;
    spec.h = o.h;
    spec.w = o.w;
    spec.d = o.d;
    spec.objects = o.objects;
    spec.noise = o.noise;
    spec.aug_jitter = o.aug_jitter;
    write_dataset(o.out, synth_dataset(o.count, spec, o.seed));
    log << "wrote " << o.count << " samples to " << o.out.string() << "\n";
    return int(kOk);
  });
}

// ---------------------------------------------------------------------------

struct TrainOptions {
  std::optional<std::filesystem::path> config;
  std::filesystem::path data;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> steps;
  std::optional<std::filesystem::path> resume;
  bool force = false;
  bool timing = false;  // record real wall_ms instead of 0
};

inline TrainConfig resolve_config(const std::optional<std::filesystem::path>& path,
                                  std::optional<std::uint64_t> seed) {
  TrainConfig cfg = path ? load_config(*path) : TrainConfig{};
  if (seed) cfg.seed = *seed;
  cfg.validate();
  return cfg;
}

inline int cmd_train(const TrainOptions& o, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    TrainConfig cfg = resolve_config(o.config, o.seed);
    if (o.steps) {
      if (*o.steps < 0) throw ConfigError(0, "--steps must be >= 0");
      cfg.max_steps = *o.steps;
    }
    for (const auto& w : cfg.warnings()) err << "warning: " << w << "\n";
    const auto data = load_data(o.data);
    const auto final_ckpt = o.out / "checkpoint.bin";
    if (std::filesystem::exists(final_ckpt) && !o.force)
      throw ConfigError(0, "train: " + final_ckpt.string() + " exists; pass --force to overwrite");
    prepare_out_dir(o.out);

    const std::string cfg_text = config_to_text(cfg);
    Trainer trainer(cfg, data);
    if (o.resume) {
      Checkpoint ck = load_checkpoint(*o.resume, cfg.adam);
      trainer.set_state(std::move(ck.state));
    }
    write_text(o.out / "config.txt", cfg_text);
    std::ofstream metrics(o.out / "metrics.csv", std::ios::binary | std::ios::trunc);
    if (!metrics) throw DataError("cannot write metrics.csv");
    metrics << kMetricsHeader << "\n";
    while (trainer.state().step < cfg.max_steps) {
      StepMetrics m = trainer.step();
      if (!o.timing) m.wall_ms = 0.0;
      metrics << metrics_row(m) << "\n";
      const std::int64_t done = trainer.state().step;
      if (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done < cfg.max_steps)
        save_checkpoint(trainer.state(), cfg_text,
                        o.out / ("checkpoint_step" + std::to_string(done) + ".bin"));
    }
    metrics.flush();
    if (!metrics) throw DataError("write failed for metrics.csv");
    save_checkpoint(trainer.state(), cfg_text, final_ckpt);
    log << "trained " << trainer.state().step << " steps; checkpoint " << final_ckpt.string()
        << "\n";
    return int(kOk);
  });
}

// ---------------------------------------------------------------------------

struct EvalOptions {
  std::optional<std::filesystem::path> config;
  std::filesystem::path data;
  std::filesystem::path checkpoint;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> clusters;  // default: ground-truth class count
  std::size_t probe_epochs = 0;         // 0 disables the linear probe
  double probe_lr = 0.1;
  bool force = false;
};

inline void check_dims(const TrainConfig& cfg, const TrainState& s, std::size_t d_k) {
  auto mismatch = [](const std::string& what, std::size_t a, std::size_t b) {
    throw ConfigError(0, "checkpoint/config mismatch: " + what + " " + std::to_string(a) +
                             " vs " + std::to_string(b));
  };
  if (s.params.d_s() != std::size_t(cfg.d_s)) mismatch("d_s", s.params.d_s(), std::size_t(cfg.d_s));
  if (s.params.d_z() != std::size_t(cfg.d_z)) mismatch("d_z", s.params.d_z(), std::size_t(cfg.d_z));
  if (s.centers.k() != std::size_t(cfg.k_eigenvectors))
    mismatch("k_eigenvectors", s.centers.k(), std::size_t(cfg.k_eigenvectors));
  if (s.centers.classes() != std::size_t(cfg.c_classes))
    mismatch("c_classes", s.centers.classes(), std::size_t(cfg.c_classes));
  if (s.params.d_k() != d_k) mismatch("D_K (data)", s.params.d_k(), d_k);
}

// Config for a checkpoint: --config when given (validated against the
// checkpoint), else the config text embedded in it.
inline TrainConfig config_for_checkpoint(const std::optional<std::filesystem::path>& path,
                                         const Checkpoint& ck) {
  if (path) return load_config(*path);
  return parse_config(ck.config_text);
}

inline int cmd_eval(const EvalOptions& o, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    Checkpoint ck = [&] {
      try {
        return load_checkpoint(o.checkpoint);
      } catch (const FormatError& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
      }
    }();
    TrainConfig cfg = config_for_checkpoint(o.config, ck);
    if (o.seed) cfg.seed = *o.seed;
    const auto data = load_data(o.data);
    check_dims(cfg, ck.state, data.front().base.d());
    const std::size_t classes = class_count(data);
    const std::size_t clusters = o.clusters.value_or(classes);
    if (clusters < 1) throw ConfigError(0, "--clusters must be >= 1");
    const auto maps_dir = o.out / "maps";
    if (std::filesystem::exists(o.out / "eval_metrics.csv") && !o.force)
      throw ConfigError(0, "eval: outputs exist in " + o.out.string() + "; pass --force");
    prepare_out_dir(maps_dir);

    const auto feats = infer_features(ck.state.params, data);
    const EvalReport r = evaluate_unsupervised(feats, data, clusters, cfg.seed);
    const std::size_t c = r.confusion.c;
    std::string csv = metrics_csv_header(c) + "\n" + metrics_csv_row("unsupervised", r.metrics) + "\n";
    log << "unsupervised acc=" << detail::format_double(r.metrics.acc)
        << " miou=" << detail::format_double(r.metrics.miou) << "\n";

    // Predictions relabeled into ground-truth classes through the matching.
    std::vector<int> to_gt(c, 0);
    for (std::size_t g = 0; g < c; ++g) to_gt[r.perm[g]] = int(g);
    for (std::size_t i = 0; i < data.size(); ++i) {
      SegmentMap m = r.clusters.maps[i];
      for (int& v : m.labels) v = to_gt[std::size_t(v)];
      write_pgm(maps_dir / (data[i].id + ".pgm"), m, c);
      write_ppm(maps_dir / (data[i].id + ".ppm"), m);
    }
    if (o.probe_epochs > 0) {
      const ProbeResult p = linear_probe(feats, data, classes, o.probe_epochs, o.probe_lr);
      SegMetrics padded = p.metrics;
      padded.iou.resize(c, std::numeric_limits<double>::quiet_NaN());
      csv += metrics_csv_row("linear_probe", padded) + "\n";
      log << "linear_probe acc=" << detail::format_double(p.metrics.acc)
          << " miou=" << detail::format_double(p.metrics.miou) << "\n";
    }
    write_text(o.out / "eval_metrics.csv", csv);
    return int(kOk);
  });
}

// ---------------------------------------------------------------------------

struct SpectralOptions {
  std::optional<std::filesystem::path> config;
  std::filesystem::path data;
  std::filesystem::path out;
  std::optional<std::filesystem::path> checkpoint;  // S from the trained head; else S = K
  std::optional<std::string> sample;                // restrict to one sample id
  std::size_t k = 4;
  std::size_t k_max = 10;
  std::string threshold = "otsu";  // otsu | fixed:<t>
  bool flip = false;
  bool force = false;
};

struct SpectralInputs {
  TrainConfig cfg;
  std::vector<SamplePair> data;
  std::optional<HeadParams> params;
};

inline SpectralInputs spectral_inputs(const SpectralOptions& o) {
  SpectralInputs in;
  std::optional<Checkpoint> ck;
  if (o.checkpoint) ck = load_checkpoint(*o.checkpoint);
  in.cfg = ck ? config_for_checkpoint(o.config, *ck) : resolve_config(o.config, std::nullopt);
  in.data = load_data(o.data);
  if (o.sample) {
    std::vector<SamplePair> one;
    for (auto& s : in.data)
      if (s.id == *o.sample) one.push_back(std::move(s));
    if (one.empty()) throw DataError("sample '" + *o.sample + "' not in index");
    in.data = std::move(one);
  }
  if (ck) {
    check_dims(in.cfg, ck->state, in.data.front().base.d());
    in.params = std::move(ck->state.params);
  }
  return in;
}

inline SymMatrix sample_adjacency(const SpectralInputs& in, const SamplePair& s) {
  const FeatureGrid feats = in.params ? seg_forward(s.base, *in.params) : s.base;
  return with_ridge(adjacency(color_affinity(s.image, in.cfg.affinity),
                              semantic_affinity(feats, in.cfg.affinity)),
                    in.cfg.affinity.ridge);
}

inline int cmd_eig(const SpectralOptions& o, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    if (o.k < 1) throw ConfigError(0, "--k must be >= 1");
    const SpectralInputs in = spectral_inputs(o);
    if (std::filesystem::exists(o.out / "eigenvalues.csv") && !o.force)
      throw ConfigError(0, "eig: outputs exist in " + o.out.string() + "; pass --force");
    prepare_out_dir(o.out);
    const std::size_t n = in.data.front().base.n();
    const std::size_t k = std::min(o.k, n);
    const std::size_t shown = std::min(n, std::max(o.k_max + 1, k));
    std::string values = "sample";
    for (std::size_t j = 0; j < shown; ++j) values += ",lambda_" + std::to_string(j);
    values += "\n";
    std::string gaps = "sample,k,gap\n";
    for (const auto& s : in.data) {
      const LaplacianBundle b = spectral_bundle(sample_adjacency(in, s), k);
      values += s.id;
      for (std::size_t j = 0; j < shown; ++j) values += "," + detail::format_double(b.basis.values[j]);
      values += "\n";
      const EigengapChoice g = eigengap_select(b.basis.values, o.k_max);
      gaps += s.id + "," + std::to_string(g.k) + "," + detail::format_double(g.gap) + "\n";
      for (std::size_t j = 0; j < k; ++j) {
        const auto col = b.v_hat.column(j);
        write_scalar_pgm(o.out / (s.id + "_v" + std::to_string(j) + ".pgm"), col, s.base.h(),
                         s.base.w());
      }
      log << s.id << ": eigengap selects k=" << g.k << "\n";
    }
    write_text(o.out / "eigenvalues.csv", values);
    write_text(o.out / "eigengap.csv", gaps);
    return int(kOk);
  });
}

inline MatteOptions parse_threshold(const std::string& spec, bool flip) {
  MatteOptions m;
  m.flip = flip;
  if (spec == "otsu") return m;
  if (spec.rfind("fixed:", 0) == 0) {
    m.mode = MatteOptions::Threshold::kFixed;
    const std::string v = spec.substr(6);
    m.fixed = detail::parse_number<double>(v, 0, "--threshold");
    if (!(m.fixed >= 0.0 && m.fixed <= 1.0)) throw ConfigError(0, "--threshold fixed value must be in [0, 1]");
    return m;
  }
  throw ConfigError(0, "--threshold must be 'otsu' or 'fixed:<t>'");
}

inline int cmd_matte(const SpectralOptions& o, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const MatteOptions mo = parse_threshold(o.threshold, o.flip);
    const SpectralInputs in = spectral_inputs(o);
    if (!o.force)
      for (const auto& s : in.data)
        if (std::filesystem::exists(o.out / (s.id + "_matte.pgm")))
          throw ConfigError(0, "matte: outputs exist in " + o.out.string() + "; pass --force");
    prepare_out_dir(o.out);
    for (const auto& s : in.data) {
      const Matrix& rgb = s.image.rgb();
      bool constant = true;
      for (std::size_t i = 1; i < rgb.rows() && constant; ++i)
        for (std::size_t c = 0; c < 3; ++c)
          if (rgb(i, c) != rgb(0, c)) constant = false;
      if (constant) throw DegenerateInput("matte: sample " + s.id + " has a constant image");
      const LaplacianBundle b = spectral_bundle(sample_adjacency(in, s), 2);
      const SegmentMap m = matte(matting_vector(b.basis), s.base.h(), s.base.w(), mo);
      write_pgm(o.out / (s.id + "_matte.pgm"), m, 2);
      std::size_t fg = 0;
      for (int v : m.labels) fg += std::size_t(v);
      log << s.id << ": foreground " << fg << "/" << m.n() << " patches\n";
    }
    return int(kOk);
  });
}

}  // namespace eicue::cli
