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

#include "eicue/distill.hpp"
#include "eicue/heads.hpp"
#include "support.hpp"

namespace eicue {
namespace {

FeatureGrid grid(std::size_t h, std::size_t w, std::size_t d, Rng& rng) {
  return FeatureGrid(h, w, test::random_matrix(h * w, d, rng));
}

TEST(Linear, InitBoundsAndZeroBias) {
  HeadParams p = HeadParams::initialized(16, 8, 4, 3);
  const double bound = 1.0 / std::sqrt(16.0);
  for (double v : p.seg_a.w.values()) EXPECT_LE(std::abs(v), bound);
  for (double v : p.seg_a.b.values()) EXPECT_EQ(v, 0.0);
  const HeadParams q = HeadParams::initialized(16, 8, 4, 3);
  EXPECT_EQ(p.proj.w.values()[5], q.proj.w.values()[5]);
}

TEST(Dropout, DropsWholeChannelsWithInvertedScale) {
  Rng rng(4);
  const DropoutMask m = channel_dropout_mask(1000, 0.1, rng);
  std::size_t dropped = 0;
  for (double s : m.scale) {
    EXPECT_TRUE(s == 0.0 || std::abs(s - 1.0 / 0.9) < 1e-15);
    dropped += s == 0.0;
  }
  EXPECT_GT(dropped, 60u);
  EXPECT_LT(dropped, 140u);
  EXPECT_TRUE(channel_dropout_mask(10, 0.0, rng).identity());
  EXPECT_THROW(channel_dropout_mask(10, 1.0, rng), InvalidInput);
}

TEST(SegHead, ResidualStructure) {
  Rng rng(5);
  HeadParams p = HeadParams::initialized(4, 3, 2, 1);
  const FeatureGrid k = grid(2, 2, 4, rng);
  const FeatureGrid s = seg_forward(k, p);
  Matrix relu = p.seg_b.forward(k.data());
  for (double& v : relu.values()) v = std::max(v, 0.0);
  Matrix ref = p.seg_a.forward(k.data());
  ref += p.seg_c.forward(relu);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_DOUBLE_EQ(s.data().values()[i], ref.values()[i]);
  EXPECT_THROW(seg_forward(grid(2, 2, 5, rng), p), InvalidInput);
}

TEST(SegHead, BackwardMatchesFiniteDifferences) {
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    HeadParams p = HeadParams::initialized(6, 5, 4, 10 + trial);
    for (double& v : p.seg_b.b.values()) v = rng.uniform(-0.2, 0.2);
    const FeatureGrid k = grid(3, 3, 6, rng);
    Rng drop(trial);
    const DropoutMask mask = channel_dropout_mask(6, 0.2, drop);
    const Matrix weight = test::random_matrix(9, 4, rng);
    auto f = [&] {
      const FeatureGrid z = proj_forward(seg_forward(k, p, mask), p);
      double s = 0.0;
      for (std::size_t i = 0; i < weight.size(); ++i) s += weight.values()[i] * z.data().values()[i];
      return s;
    };
    SegCache sc;
    ProjCache pc;
    proj_forward(seg_forward(k, p, mask, &sc), p, &pc);
    p.zero_grad();
    seg_backward(proj_backward(weight, pc, p), sc, p);
    EXPECT_LE(test::fd_relative_error(test::head_pointers(p), test::head_grads(p), f), 1e-7);
  }
}

TEST(SegHead, StaleCacheThrows) {
  Rng rng(7);
  HeadParams p = HeadParams::initialized(3, 3, 3, 0);
  SegCache sc;
  ProjCache pc;
  const FeatureGrid s = seg_forward(grid(2, 2, 3, rng), p, {}, &sc);
  proj_forward(s, p, &pc);
  ++p.version;
  EXPECT_THROW(seg_backward(Matrix(4, 3), sc, p), InvalidState);
  EXPECT_THROW(proj_backward(Matrix(4, 3), pc, p), InvalidState);
  EXPECT_THROW(seg_backward(Matrix(4, 3), SegCache{}, p), InvalidState);
}

// Literal loop form of -sum_ij (F_ij - b) S_ij.
double loop_corr(const Matrix& ka, const Matrix& kb, const Matrix& sa, const Matrix& sb, double b) {
  double s = 0.0;
  for (std::size_t i = 0; i < ka.rows(); ++i)
    for (std::size_t j = 0; j < kb.rows(); ++j)
      s -= (cosine_similarity(ka.row(i), kb.row(j)) - b) * cosine_similarity(sa.row(i), sb.row(j));
  return s;
}

TEST(Correspondence, MatchesLoopOracle) {
  Rng rng(8);
  const Matrix ka = test::random_matrix(7, 5, rng), kb = test::random_matrix(7, 5, rng);
  const Matrix sa = test::random_matrix(7, 3, rng), sb = test::random_matrix(7, 3, rng);
  DistillConfig cfg;
  const CorrTerm t = corr_term(ka, kb, sa, sb, ShiftKind::kAug, cfg);
  EXPECT_NEAR(t.value, loop_corr(ka, kb, sa, sb, t.shift), 1e-12);
  cfg.reduction = CorrReduction::kMean;
  const CorrTerm m = corr_term(ka, kb, sa, sb, ShiftKind::kAug, cfg);
  EXPECT_NEAR(m.value, loop_corr(ka, kb, sa, sb, m.shift) / 49.0, 1e-13);
}

TEST(Correspondence, ShiftFormulas) {
  Matrix kc(1, 2), sc(1, 2);
  kc(0, 0) = 0.4;
  kc(0, 1) = 0.2;
  sc(0, 0) = 0.9;
  sc(0, 1) = 0.7;
  EXPECT_NEAR(shift_b_aug(kc, sc, 0.0), 0.5, 1e-15);
  EXPECT_NEAR(shift_b_aug(kc, sc, 0.1), 0.6, 1e-15);
  EXPECT_NEAR(shift_b_rand(kc, sc, 0.0, 3.5), (0.3 + 0.8) * 3.5, 1e-14);
  EXPECT_GE(shift_b_aug(sc, kc, 0.5), 0.0);
}

TEST(Correspondence, GradientWithFrozenShiftMatchesFiniteDifferences) {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix ka = test::random_matrix(8, 4, rng), kb = test::random_matrix(8, 4, rng);
    Matrix sa = test::random_matrix(8, 3, rng), sb = test::random_matrix(8, 3, rng);
    DistillConfig cfg;
    cfg.reduction = trial % 2 ? CorrReduction::kMean : CorrReduction::kSum;
    const ShiftKind kind = trial % 3 ? ShiftKind::kAug : ShiftKind::kRand;
    const CorrTerm t = corr_term(ka, kb, sa, sb, kind, cfg);
    const Matrix kc = corr_tensor(ka, kb);
    auto f = [&] { return corr_loss(kc, corr_tensor(sa, sb), t.shift, cfg.reduction).value; };
    EXPECT_LE(test::fd_relative_error(test::pointers(sa), test::flat(t.grad_s_a), f), 1e-7);
    EXPECT_LE(test::fd_relative_error(test::pointers(sb), test::flat(t.grad_s_b), f), 1e-7);
  }
}

TEST(Correspondence, ShiftChangesWithSButGradientIgnoresIt) {
  Rng rng(10);
  const Matrix ka = test::random_matrix(5, 4, rng), kb = test::random_matrix(5, 4, rng);
  Matrix sa = test::random_matrix(5, 3, rng);
  const Matrix sb = test::random_matrix(5, 3, rng);
  const CorrTerm a = corr_term(ka, kb, sa, sb, ShiftKind::kRand, {});
  sa(0, 0) += 0.5;
  const CorrTerm b = corr_term(ka, kb, sa, sb, ShiftKind::kRand, {});
  EXPECT_NE(a.shift, b.shift);
}

TEST(Correspondence, TotalIsSumOfTerms) {
  Rng rng(11);
  const Matrix k = test::random_matrix(6, 4, rng), ka = test::random_matrix(6, 4, rng);
  const Matrix kp = test::random_matrix(6, 4, rng);
  const Matrix s = test::random_matrix(6, 3, rng), sa = test::random_matrix(6, 3, rng);
  const Matrix sp = test::random_matrix(6, 3, rng);
  const CorrTotal t = corr_total(k, ka, s, sa, kp, sp, {});
  EXPECT_DOUBLE_EQ(t.value, t.aug.value + t.rand.value);
  EXPECT_DOUBLE_EQ(t.rand.value, corr_term(k, kp, s, sp, ShiftKind::kRand, {}).value);
}

TEST(Partner, UniformExcludingSelf) {
  Rng rng(12);
  std::vector<int> hits(5, 0);
  for (int i = 0; i < 4000; ++i) ++hits[pick_partner(5, 2, rng)];
  EXPECT_EQ(hits[2], 0);
  for (int c : {0, 1, 3, 4}) EXPECT_GT(hits[std::size_t(c)], 850);
  EXPECT_THROW(pick_partner(1, 0, rng), SkipTerm);
  EXPECT_THROW(pick_partner(3, 3, rng), InvalidInput);
}

}  // namespace
}  // namespace eicue
