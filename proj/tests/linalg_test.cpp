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

#include "eicue/linalg.hpp"
#include "support.hpp"

namespace eicue {
namespace {

TEST(Matrix, MatmulVariantsAgreeWithTranspose) {
  Rng rng(3);
  const Matrix a = test::random_matrix(4, 3, rng), b = test::random_matrix(4, 5, rng);
  const Matrix c = test::random_matrix(5, 3, rng);
  const Matrix tn = matmul_tn(a, b), ref_tn = matmul(a.transposed(), b);
  const Matrix nt = matmul_nt(a, c), ref_nt = matmul(a, c.transposed());
  for (std::size_t i = 0; i < tn.size(); ++i) EXPECT_NEAR(tn.values()[i], ref_tn.values()[i], 1e-14);
  for (std::size_t i = 0; i < nt.size(); ++i) EXPECT_NEAR(nt.values()[i], ref_nt.values()[i], 1e-14);
}

TEST(Matrix, ShapeMismatchThrows) {
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), InvalidInput);
  Matrix a(2, 2);
  EXPECT_THROW(a += Matrix(3, 2), InvalidInput);
}

TEST(SymMatrix, RejectsAsymmetricAndNonFinite) {
  Matrix m(2, 2);
  m(0, 1) = 1.0;
  EXPECT_THROW(SymMatrix{m}, InvalidInput);
  Matrix nan(2, 2);
  nan(0, 0) = std::nan("");
  EXPECT_THROW(SymMatrix{nan}, InvalidInput);
  EXPECT_THROW(SymMatrix(Matrix(2, 3)), InvalidInput);
}

TEST(SymEigen, ReconstructsAndIsOrthonormal) {
  Rng rng(11);
  for (std::size_t n : {1u, 2u, 3u, 7u, 40u, 101u}) {
    const SymMatrix m = test::random_symmetric(n, rng);
    const EigenBasis b = sym_eigendecompose(m);
    ASSERT_EQ(b.values.size(), n);
    EXPECT_LE(test::reconstruction_error(m, b), 1e-10) << "n=" << n;
    EXPECT_LE(test::orthogonality_error(b.vectors), 1e-10) << "n=" << n;
    EXPECT_TRUE(std::is_sorted(b.values.begin(), b.values.end()));
  }
}

TEST(SymEigen, DiagonalMatrixKnownSpectrum) {
  Matrix m(4, 4);
  const double d[] = {3.0, -1.0, 2.0, 0.5};
  for (std::size_t i = 0; i < 4; ++i) m(i, i) = d[i];
  const EigenBasis b = sym_eigendecompose(SymMatrix(m));
  EXPECT_DOUBLE_EQ(b.values[0], -1.0);
  EXPECT_DOUBLE_EQ(b.values[1], 0.5);
  EXPECT_DOUBLE_EQ(b.values[2], 2.0);
  EXPECT_DOUBLE_EQ(b.values[3], 3.0);
  EXPECT_NEAR(std::abs(b.vectors(1, 0)), 1.0, 1e-15);
}

TEST(SymEigen, RepeatedEigenvaluesStayOrthogonal) {
  // I + u u^T has eigenvalue 1 with multiplicity n-1.
  const std::size_t n = 12;
  Rng rng(5);
  Matrix m(n, n);
  std::vector<double> u(n);
  for (double& v : u) v = rng.normal();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = (i == j ? 1.0 : 0.0) + u[i] * u[j];
  const SymMatrix s(m);
  const EigenBasis full = sym_eigendecompose(s);
  EXPECT_LE(test::orthogonality_error(full.vectors), 1e-12);
  EXPECT_LE(test::reconstruction_error(s, full), 1e-12);
  const EigenBasis part = sym_eigen_smallest(s, 5);
  EXPECT_LE(test::orthogonality_error(part.vectors), 1e-10);
}

TEST(SymEigen, SignConventionLargestEntryPositive) {
  Rng rng(8);
  const EigenBasis b = sym_eigendecompose(test::random_symmetric(9, rng));
  for (std::size_t j = 0; j < 9; ++j) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < 9; ++i)
      if (std::abs(b.vectors(i, j)) > std::abs(b.vectors(arg, j))) arg = i;
    EXPECT_GT(b.vectors(arg, j), 0.0);
  }
}

TEST(SymEigenSmallest, MatchesFullSolver) {
  Rng rng(21);
  for (std::size_t n : {2u, 5u, 33u, 120u}) {
    const SymMatrix m = test::random_symmetric(n, rng);
    const EigenBasis full = sym_eigendecompose(m);
    const std::size_t k = std::min<std::size_t>(4, n);
    const EigenBasis part = sym_eigen_smallest(m, k);
    ASSERT_EQ(part.values.size(), n);
    ASSERT_EQ(part.vectors.cols(), k);
    for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(part.values[j], full.values[j], 1e-12);
    for (std::size_t j = 0; j < k; ++j) {
      double worst = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        worst = std::max(worst, std::abs(part.vectors(i, j) - full.vectors(i, j)));
      EXPECT_LE(worst, 1e-8) << "n=" << n << " column " << j;
    }
  }
}

TEST(SymEigenSmallest, ResidualIsSmall) {
  Rng rng(4);
  const SymMatrix m = test::random_symmetric(80, rng);
  const EigenBasis b = sym_eigen_smallest(m, 6);
  for (std::size_t j = 0; j < 6; ++j) {
    double r = 0.0;
    for (std::size_t i = 0; i < 80; ++i) {
      double s = -b.values[j] * b.vectors(i, j);
      for (std::size_t c = 0; c < 80; ++c) s += m(i, c) * b.vectors(c, j);
      r = std::max(r, std::abs(s));
    }
    EXPECT_LE(r, 1e-10);
  }
}

TEST(SymEigenSmallest, RejectsBadK) {
  Rng rng(1);
  const SymMatrix m = test::random_symmetric(5, rng);
  EXPECT_THROW(sym_eigen_smallest(m, 0), InvalidInput);
  EXPECT_THROW(sym_eigen_smallest(m, 6), InvalidInput);
}

TEST(RowSoftmax, RowsSumToOneAndResistOverflow) {
  Matrix p(2, 3);
  p(0, 0) = 1000.0;
  p(0, 1) = 999.0;
  p(1, 2) = -1000.0;
  const Matrix s = row_softmax(p);
  for (std::size_t i = 0; i < 2; ++i) {
    double t = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_TRUE(std::isfinite(s(i, j)));
      t += s(i, j);
    }
    EXPECT_NEAR(t, 1.0, 1e-15);
  }
  EXPECT_NEAR(s(0, 0) / s(0, 1), std::exp(1.0), 1e-12);
}

TEST(NormalizeRows, BackwardMatchesFiniteDifferences) {
  Rng rng(9);
  Matrix x = test::random_matrix(5, 4, rng);
  const Matrix weight = test::random_matrix(5, 4, rng);
  auto f = [&] {
    const Matrix u = normalize_rows(x).unit;
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u.values()[i] * weight.values()[i];
    return s;
  };
  const Matrix g = normalize_rows_backward(normalize_rows(x), weight);
  EXPECT_LE(test::fd_relative_error(test::pointers(x), test::flat(g), f), 1e-7);
}

TEST(CosineSimilarity, ZeroVectorConvention) {
  const std::vector<double> z(3, 0.0), a = {1.0, 2.0, 3.0};
  EXPECT_EQ(cosine_similarity(z, a), 0.0);
  EXPECT_NEAR(cosine_similarity(a, a), 1.0, 1e-15);
  EXPECT_THROW(cosine_similarity(a, std::vector<double>(2)), InvalidInput);
}

}  // namespace
}  // namespace eicue
