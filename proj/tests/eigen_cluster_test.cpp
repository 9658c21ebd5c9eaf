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

#include "eicue/eigen_cluster.hpp"
#include "support.hpp"

namespace eicue {
namespace {

TEST(EicueMap, EqualsRowArgmax) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c = 2 + rng.index(6);
    Matrix p = test::random_matrix(12, c, rng, -2.0, 2.0);
    if (trial % 3 == 0) p(0, 1) = p(0, 0);  // exact tie
    EXPECT_EQ(eicue_map(p, 3, 4).labels, test::row_argmax(p));
  }
}

TEST(EicueMap, RejectsNonFiniteAndBadShape) {
  Matrix p(4, 2);
  EXPECT_THROW(eicue_map(p, 3, 1), InvalidInput);
  p(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(eicue_map(p, 2, 2), InvalidInput);
}

TEST(EigLoss, ValueIsNegativeSoftmaxWeightedScore) {
  Matrix p(1, 2);
  p(0, 0) = 1.0;
  const double e = std::exp(1.0);
  const LossAndGrad l = eig_loss(p);
  EXPECT_NEAR(l.value, -(e / (e + 1.0)), 1e-15);
}

TEST(EigLoss, GradientWrtCentersMatchesFiniteDifferences) {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix v = test::random_matrix(16, 4, rng);
    ClusterCenters centers(test::random_matrix(4, 5, rng));
    auto f = [&] { return eig_loss(assignment_scores(v, centers)).value; };
    const Matrix g = centers_gradient(v, eig_loss(assignment_scores(v, centers)).grad);
    EXPECT_LE(test::fd_relative_error(test::pointers(centers.weights), test::flat(g), f), 1e-7);
  }
}

TEST(AssignmentScores, RowsOfNormalizedEigenfeatures) {
  Matrix v(2, 2);
  v(0, 0) = 3.0;
  v(0, 1) = 4.0;
  Matrix c(2, 1);
  c(0, 0) = 1.0;
  const Matrix p = assignment_scores(v, ClusterCenters(c));
  EXPECT_NEAR(p(0, 0), 0.6, 1e-15);
  EXPECT_EQ(p(1, 0), 0.0);
  EXPECT_THROW(assignment_scores(Matrix(2, 3), ClusterCenters(c)), InvalidInput);
}

TEST(ClusterCenters, ColumnsAreUnitAfterStep) {
  Rng rng(3);
  ClusterCenters c(test::random_matrix(4, 3, rng));
  const Matrix v = test::random_matrix(10, 4, rng);
  centers_step(c, eig_loss(assignment_scores(v, c)).grad, v, 0.1);
  for (std::size_t j = 0; j < 3; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < 4; ++i) s += c.weights(i, j) * c.weights(i, j);
    EXPECT_NEAR(s, 1.0, 1e-14);
  }
}

TEST(KMeansPlusPlus, DeterministicAndUnitColumns) {
  Rng data_rng(4);
  const Matrix v1 = test::random_matrix(20, 4, data_rng), v2 = test::random_matrix(20, 4, data_rng);
  Rng a(9), b(9);
  const ClusterCenters c1 = init_centers_kmeanspp({&v1, &v2}, 5, a);
  const ClusterCenters c2 = init_centers_kmeanspp({&v1, &v2}, 5, b);
  EXPECT_EQ(c1.weights.values()[0], c2.weights.values()[0]);
  for (std::size_t i = 0; i < c1.weights.size(); ++i)
    EXPECT_EQ(c1.weights.values()[i], c2.weights.values()[i]);
  ASSERT_EQ(c1.k(), 4u);
  ASSERT_EQ(c1.classes(), 5u);
}

}  // namespace
}  // namespace eicue
