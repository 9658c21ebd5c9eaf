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
#include <gtest/gtest.h>

#include "eicue/checkpoint.hpp"
#include "eicue/trainer.hpp"
#include "support.hpp"

namespace eicue {
namespace {

std::vector<SamplePair> small_data(std::size_t count = 6, std::uint64_t seed = 3) {
  SceneSpec spec;
  spec.h = spec.w = 6;
  spec.d = 8;
  spec.objects = 3;
  return synth_dataset(count, spec, seed);
}

TrainConfig small_config() {
  TrainConfig c;
  c.d_s = 8;
  c.d_z = 6;
  c.c_classes = 3;
  c.batch_size = 4;
  c.ramp_steps = 3;
  c.max_steps = 6;
  c.lr_heads = 1e-3;
  c.lr_centers = 1e-3;
  c.seed = 42;
  return c;
}

std::vector<std::string> run_rows(Trainer& t, int steps) {
  std::vector<std::string> rows;
  for (int i = 0; i < steps; ++i) {
    StepMetrics m = t.step();
    m.wall_ms = 0.0;
    rows.push_back(metrics_row(m));
  }
  return rows;
}

TEST(Ramp, ShapesHitEndpoints) {
  TrainConfig c;
  EXPECT_DOUBLE_EQ(lambda_nce_at(0, c), 0.0);
  EXPECT_DOUBLE_EQ(lambda_nce_at(100, c), 0.45);
  EXPECT_DOUBLE_EQ(lambda_nce_at(200, c), 0.9);
  EXPECT_DOUBLE_EQ(lambda_nce_at(5000, c), 0.9);
  for (RampShape s : {RampShape::kCosine, RampShape::kExponential}) {
    c.ramp_shape = s;
    EXPECT_NEAR(lambda_nce_at(0, c), 0.0, 1e-15);
    EXPECT_NEAR(lambda_nce_at(200, c), 0.9, 1e-15);
    EXPECT_LT(lambda_nce_at(50, c), lambda_nce_at(51, c));
  }
  EXPECT_THROW(lambda_nce_at(-1, c), InvalidInput);
}

TEST(TotalLoss, CombinesAndRejectsNonFinite) {
  EXPECT_DOUBLE_EQ(total_loss({2.0, 4.0, 1.0}, 0.25, 0.5), 0.25 * 2.0 + 0.75 * 4.0 + 0.5);
  EXPECT_THROW(total_loss({std::nan(""), 0.0, 0.0}, 0.5, 1.0), NumericalFailure);
}

TEST(Trainer, BatchesAreDistinctAndSeeded) {
  const auto data = small_data();
  Trainer a(small_config(), data), b(small_config(), data);
  for (std::int64_t t = 0; t < 5; ++t) {
    auto idx = a.batch_indices(t);
    EXPECT_EQ(idx, b.batch_indices(t));
    ASSERT_EQ(idx.size(), 4u);
    std::sort(idx.begin(), idx.end());
    EXPECT_EQ(std::unique(idx.begin(), idx.end()), idx.end());
  }
  EXPECT_NE(a.batch_indices(0), a.batch_indices(1));
}

TEST(Trainer, ZeroLearningRatesLeaveParametersBitwiseUnchanged) {
  const auto data = small_data();
  TrainConfig c = small_config();
  c.lr_heads = 0.0;
  c.lr_centers = 0.0;
  Trainer t(c, data);
  const std::string cfg_text = config_to_text(c);
  TrainState before = t.state();
  run_rows(t, 4);
  TrainState after = t.state();
  for (TrainState* s : {&before, &after}) s->step = 0;
  EXPECT_EQ(serialize_checkpoint(before, cfg_text), serialize_checkpoint(after, cfg_text));
}

TEST(Trainer, ZeroNceWeightNeverEvaluatesObjNce) {
  const auto data = small_data();
  TrainConfig c = small_config();
  c.lambda_nce_target = 0.0;
  Trainer off(c, data);
  for (int i = 0; i < 4; ++i) {
    const StepMetrics m = off.step();
    EXPECT_EQ(m.l_obj, 0.0);
    EXPECT_EQ(m.l_sc, 0.0);
  }
  EXPECT_EQ(off.objnce_evaluations(), 0u);
  Trainer on(small_config(), data);
  run_rows(on, 4);
  EXPECT_GT(on.objnce_evaluations(), 0u);
}

TEST(Trainer, RerunIsDeterministic) {
  const auto data = small_data();
  Trainer a(small_config(), data), b(small_config(), data);
  EXPECT_EQ(run_rows(a, 5), run_rows(b, 5));
  const std::string text = config_to_text(small_config());
  EXPECT_EQ(serialize_checkpoint(a.state(), text), serialize_checkpoint(b.state(), text));
}

TEST(Trainer, ThreadCountDoesNotChangeResults) {
  const auto data = small_data();
  const std::string text = config_to_text(small_config());
  auto run = [&](const char* threads) {
    setenv("EICUE_THREADS", threads, 1);
    Trainer t(small_config(), data);
    auto rows = run_rows(t, 3);
    unsetenv("EICUE_THREADS");
    return std::make_pair(rows, serialize_checkpoint(t.state(), text));
  };
  EXPECT_EQ(run("1"), run("3"));
}

TEST(Trainer, ResumeFromCheckpointMatchesContinuousRun) {
  const auto data = small_data();
  const TrainConfig c = small_config();
  const std::string text = config_to_text(c);
  Trainer straight(c, data);
  const auto rows = run_rows(straight, 5);

  Trainer first(c, data);
  auto head = run_rows(first, 2);
  const auto bytes = serialize_checkpoint(first.state(), text);
  Trainer second(c, data);
  second.set_state(parse_checkpoint(bytes, c.adam).state);
  auto tail = run_rows(second, 3);
  head.insert(head.end(), tail.begin(), tail.end());
  EXPECT_EQ(head, rows);
  EXPECT_EQ(serialize_checkpoint(second.state(), text), serialize_checkpoint(straight.state(), text));
}

TEST(Trainer, TrainingLowersTheLoss) {
  const auto data = small_data(8, 5);
  TrainConfig c = small_config();
  c.lambda_nce_target = 0.0;
  c.lr_heads = 5e-3;
  c.batch_size = 8;
  Trainer t(c, data);
  const double first = t.step().l_total;
  double last = first;
  for (int i = 0; i < 15; ++i) last = t.step().l_total;
  EXPECT_LT(last, first);
}

TEST(Trainer, BatchOfOneSkipsRandomPartner) {
  const auto data = small_data(3);
  TrainConfig c = small_config();
  c.batch_size = 1;
  Trainer t(c, data);
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(std::isfinite(t.step().l_total));
}

TEST(Trainer, SetStateChecksDimensions) {
  const auto data = small_data();
  Trainer t(small_config(), data);
  TrainConfig other = small_config();
  other.d_s = 5;
  EXPECT_THROW(t.set_state(initial_state(other, 8)), InvalidInput);
}

TEST(Trainer, RejectsEmptyAndInconsistentData) {
  EXPECT_THROW(Trainer(small_config(), {}), DataError);
  auto data = small_data(2);
  SceneSpec spec;
  spec.h = spec.w = 6;
  spec.d = 5;
  data.push_back(synth_dataset(1, spec, 9)[0]);
  EXPECT_THROW(Trainer(small_config(), data), DataError);
  TrainConfig c = small_config();
  c.tau = -1.0;
  EXPECT_THROW(Trainer(c, small_data(2)), ConfigError);
}

TEST(Trainer, EvalModeFeaturesIgnoreDropout) {
  const auto data = small_data(2);
  Trainer t(small_config(), data);
  const auto f = infer_features(t.state().params, data);
  const FeatureGrid ref = seg_forward(data[1].base, t.state().params);
  EXPECT_EQ(f[1].data().values()[3], ref.data().values()[3]);
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto data = small_data();
  Trainer t(small_config(), data);
  run_rows(t, 2);
  const std::string text = config_to_text(small_config());
  const auto bytes = serialize_checkpoint(t.state(), text);
  Checkpoint ck = parse_checkpoint(bytes);
  EXPECT_EQ(ck.config_text, text);
  EXPECT_EQ(ck.state.step, 2);
  EXPECT_TRUE(ck.state.centers_ready);
  EXPECT_EQ(serialize_checkpoint(ck.state, text), bytes);
  const auto dir = test::scratch_dir("ckpt");
  save_checkpoint(t.state(), text, dir / "c.bin");
  EXPECT_EQ(test::read_bytes(dir / "c.bin"), bytes);
  EXPECT_EQ(load_checkpoint(dir / "c.bin").state.step, 2);
}

TEST(Checkpoint, CorruptionIsDetected) {
  TrainState s = initial_state(small_config(), 8);
  const auto good = serialize_checkpoint(s, "x = 1\n");
  auto flipped = good;
  flipped[good.size() / 2] ^= 0x10;
  EXPECT_THROW(parse_checkpoint(flipped), FormatError);
  auto magic = good;
  magic[0] = 'X';
  EXPECT_THROW(parse_checkpoint(magic), FormatError);
  auto truncated = good;
  truncated.resize(good.size() - 20);
  EXPECT_THROW(parse_checkpoint(truncated), FormatError);
  EXPECT_THROW(parse_checkpoint({}), FormatError);
  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt.bin"), DataError);
}

TEST(Checkpoint, VersionMismatchReportsOffset) {
  TrainState s = initial_state(small_config(), 8);
  auto bytes = serialize_checkpoint(s, "");
  bytes[8] = 7;
  const std::size_t body = bytes.size() - 8;
  const std::uint64_t sum = fnv1a64(bytes.data(), body);
  npy::store_le(bytes.data() + body, sum);
  try {
    parse_checkpoint(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 8u);
  }
}

TEST(Metrics, RowMatchesHeaderColumns) {
  StepMetrics m;
  m.step = 3;
  m.l_total = 0.5;
  const std::string row = metrics_row(m);
  EXPECT_EQ(std::count(row.begin(), row.end(), ','),
            std::count(kMetricsHeader, kMetricsHeader + std::strlen(kMetricsHeader), ','));
  EXPECT_EQ(row.rfind("3,0.5,", 0), 0u);
}

}  // namespace
}  // namespace eicue
