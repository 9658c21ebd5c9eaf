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

#include "eicue/features.hpp"
#include "eicue/npy.hpp"
#include "support.hpp"

namespace eicue {
namespace {

TEST(Npy, RoundTripFloat32) {
  const auto dir = test::scratch_dir("npy");
  Rng rng(1);
  const FeatureGrid g(3, 4, test::random_matrix(12, 5, rng));
  write_tensor_file(dir / "g.npy", g);
  const FeatureGrid back = load_tensor_file(dir / "g.npy");
  ASSERT_TRUE(back.same_shape(g));
  for (std::size_t i = 0; i < g.data().size(); ++i)
    EXPECT_EQ(back.data().values()[i], double(float(g.data().values()[i])));
}

TEST(Npy, MalformedFilesRaiseFormatError) {
  EXPECT_THROW(npy::parse({'x', 'y'}), FormatError);
  Rng rng(2);
  const auto good = npy::serialize(detail::float_array({2, 2, 2}, test::random_matrix(4, 2, rng)));
  auto truncated = good;
  truncated.resize(good.size() - 3);
  EXPECT_THROW(npy::parse(truncated), FormatError);
  auto bad_version = good;
  bad_version[6] = 9;
  EXPECT_THROW(npy::parse(bad_version), FormatError);
}

TEST(Npy, WrongRankIsFormatError) {
  const auto dir = test::scratch_dir("npy_rank");
  npy::write(dir / "r.npy", detail::float_array({4, 2}, Matrix(4, 2)));
  EXPECT_THROW(load_tensor_file(dir / "r.npy"), FormatError);
}

TEST(Synth, DatasetIsDeterministicAndShaped) {
  SceneSpec spec;
  spec.h = 8;
  spec.w = 6;
  spec.d = 12;
  spec.objects = 4;
  const auto a = synth_dataset(3, spec, 5), b = synth_dataset(3, spec, 5);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a[i].base.h(), 8u);
    EXPECT_EQ(a[i].base.w(), 6u);
    EXPECT_EQ(a[i].base.d(), 12u);
    EXPECT_EQ(a[i].ground_truth, b[i].ground_truth);
    EXPECT_EQ(a[i].base.data().values()[7], b[i].base.data().values()[7]);
    EXPECT_LE(a[i].ground_truth->max_label(), 3);
  }
  EXPECT_NE(synth_dataset(1, spec, 6)[0].base.data().values()[0], a[0].base.data().values()[0]);
}

TEST(Dataset, WriteThenLoad) {
  const auto dir = test::scratch_dir("dataset");
  SceneSpec spec;
  spec.h = spec.w = 4;
  spec.d = 6;
  const auto data = synth_dataset(2, spec, 1);
  write_dataset(dir, data);
  const auto back = load_dataset(dir);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].id, data[1].id);
  EXPECT_EQ(back[1].ground_truth, data[1].ground_truth);
}

TEST(Dataset, MissingPiecesAreDataErrors) {
  const auto dir = test::scratch_dir("dataset_missing");
  EXPECT_THROW(load_dataset(dir / "nope"), DataError);
  EXPECT_THROW(load_dataset(dir), DataError);
  {
    std::ofstream(dir / "index.txt") << "# only comments\n\n";
  }
  EXPECT_THROW(load_dataset(dir), DataError);
  {
    std::ofstream(dir / "index.txt") << "ghost\n";
  }
  EXPECT_THROW(load_dataset(dir), DataError);
}

TEST(Dataset, MismatchedShapesAreDataErrors) {
  const auto dir = test::scratch_dir("dataset_shapes");
  SceneSpec a;
  a.h = a.w = 4;
  a.d = 6;
  SceneSpec b = a;
  b.h = 5;
  auto data = synth_dataset(1, a, 1);
  auto other = synth_dataset(1, b, 1);
  other[0].id = "other";
  data.push_back(other[0]);
  write_dataset(dir, data);
  EXPECT_THROW(load_dataset(dir), DataError);
}

TEST(ImageResize, ConstantImageStaysConstant) {
  RgbImage img;
  img.height = 10;
  img.width = 7;
  img.pixels.assign(10 * 7 * 3, 0.25);
  const PatchImage p = resize_image_to_patches(img, 3, 2);
  for (double v : p.rgb().values()) EXPECT_NEAR(v, 0.25, 1e-15);
}

}  // namespace
}  // namespace eicue
