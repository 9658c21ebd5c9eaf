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
// Trains on a handful of synthetic scenes, then reports unsupervised
// accuracy and mIoU together with the eigengap estimate for one scene.
//
//   eicue_quickstart [steps]

#include <cstdio>
#include <cstdlib>

#include "eicue/evaluator.hpp"
#include "eicue/features.hpp"
#include "eicue/spectral.hpp"
#include "eicue/trainer.hpp"

int main(int argc, char** argv) {
  using namespace eicue;
  const long steps = argc > 1 ? std::atol(argv[1]) : 40;

  SceneSpec spec;
  spec.h = spec.w = 12;
  spec.objects = 3;
  const auto data = synth_dataset(8, spec, 1);

  TrainConfig cfg;
  cfg.c_classes = 3;
  cfg.d_s = cfg.d_z = 16;
  cfg.batch_size = 8;
  cfg.ramp_steps = steps / 2 + 1;
  cfg.max_steps = steps;

  try {
    Trainer trainer(cfg, data);
    while (trainer.state().step < cfg.max_steps) {
      const StepMetrics m = trainer.step();
      if (m.step % 10 == 0) std::printf("step %4lld  L_total %+.4f\n", static_cast<long long>(m.step), m.l_total);
    }
    const auto feats = infer_features(trainer.state().params, data);
    const EvalReport r = evaluate_unsupervised(feats, data, class_count(data), cfg.seed);
    std::printf("acc %.4f  mIoU %.4f\n", r.metrics.acc, r.metrics.miou);

    const SymMatrix a = adjacency(color_affinity(data[0].image, cfg.affinity),
                                  semantic_affinity(feats[0], cfg.affinity));
    const LaplacianBundle b = spectral_bundle(a, 10);
    std::printf("eigengap k for %s: %zu\n", data[0].id.c_str(), eigengap_select(b.basis.values, 9).k);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
