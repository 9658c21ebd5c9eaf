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
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "eicue/cli.hpp"

namespace {

void add_spectral_options(CLI::App* sub, eicue::cli::SpectralOptions& o) {
  sub->add_option("--data", o.data, "dataset directory")->required();
  sub->add_option("--out", o.out, "output directory")->required();
  sub->add_option("--config", o.config, "config file");
  sub->add_option("--checkpoint", o.checkpoint, "checkpoint; without it S = K");
  sub->add_option("--sample", o.sample, "only this sample id");
  sub->add_flag("--force", o.force, "overwrite existing outputs");
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = eicue::cli;
  CLI::App app{"eicue: unsupervised segmentation with eigen-cue distillation"};
  app.require_subcommand(1);

  cli::SynthOptions synth;
  auto* s = app.add_subcommand("synth", "write a synthetic dataset");
  s->set_help_flag("--help", "print this help");
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_option("--count", synth.count, "number of samples");
  s->add_option("--objects", synth.objects, "classes per dataset");
  s->add_option("--h", synth.h, "patch rows");
  s->add_option("--w", synth.w, "patch columns");
  s->add_option("--d", synth.d, "feature channels");
  s->add_option("--noise", synth.noise, "feature noise sigma");
  s->add_option("--aug-jitter", synth.aug_jitter, "augmented view jitter sigma");
  s->add_option("--seed", synth.seed, "seed");
  s->add_flag("--force", synth.force, "overwrite an existing dataset");

  cli::TrainOptions train;
  auto* t = app.add_subcommand("train", "train the segmentation heads");
  t->add_option("--data", train.data, "dataset directory")->required();
  t->add_option("--out", train.out, "run directory")->required();
  t->add_option("--config", train.config, "config file");
  t->add_option("--seed", train.seed, "override the config seed");
  t->add_option("--steps", train.steps, "override max_steps");
  t->add_option("--resume", train.resume, "continue from a checkpoint");
  t->add_flag("--timing", train.timing, "record wall-clock time per step");
  t->add_flag("--force", train.force, "overwrite an existing checkpoint");

  cli::EvalOptions eval;
  auto* e = app.add_subcommand("eval", "cluster and score a trained checkpoint");
  e->add_option("--data", eval.data, "dataset directory")->required();
  e->add_option("--checkpoint", eval.checkpoint, "checkpoint")->required();
  e->add_option("--out", eval.out, "output directory")->required();
  e->add_option("--config", eval.config, "config file; default is the embedded one");
  e->add_option("--seed", eval.seed, "clustering seed");
  e->add_option("--clusters", eval.clusters, "cluster count; default is the class count");
  e->add_option("--probe-epochs", eval.probe_epochs, "linear probe epochs, 0 to skip");
  e->add_option("--probe-lr", eval.probe_lr, "linear probe learning rate");
  e->add_flag("--force", eval.force, "overwrite existing outputs");

  cli::SpectralOptions eig;
  auto* g = app.add_subcommand("eig", "dump Laplacian eigenvalues and eigenvectors");
  add_spectral_options(g, eig);
  g->add_option("--k", eig.k, "eigenvectors to write");
  g->add_option("--kmax", eig.k_max, "largest k considered by the eigengap");

  cli::SpectralOptions mat;
  auto* m = app.add_subcommand("matte", "binary foreground matte from the Fiedler vector");
  add_spectral_options(m, mat);
  m->add_option("--threshold", mat.threshold, "otsu or fixed:<t>");
  m->add_flag("--flip", mat.flip, "invert the foreground side");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : cli::kConfig;
  }

  if (*s) return cli::cmd_synth(synth, std::cout, std::cerr);
  if (*t) return cli::cmd_train(train, std::cout, std::cerr);
  if (*e) return cli::cmd_eval(eval, std::cout, std::cerr);
  if (*g) return cli::cmd_eig(eig, std::cout, std::cerr);
  if (*m) return cli::cmd_matte(mat, std::cout, std::cerr);
  return cli::kConfig;
}
