// Copyright 2026 The gradcomp Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gradcomp/transforms.h"

#include <cmath>
#include <numeric>

#include "gradcomp/error.h"
#include "gtest/gtest.h"

namespace gradcomp::transforms {
namespace {

using core::GradientVector;

std::vector<float> RandomValues(size_t n, uint64_t seed) {
  core::Rng rng(seed);
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.Normal());
  return v;
}

// Sylvester construction: H_1 = [1], H_2k = [[H, H], [H, -H]].
std::vector<std::vector<double>> Sylvester(size_t n) {
  std::vector<std::vector<double>> h = {{1.0}};
  for (size_t m = 1; m < n; m *= 2) {
    std::vector<std::vector<double>> next(2 * m, std::vector<double>(2 * m));
    for (size_t i = 0; i < m; ++i) {
      for (size_t j = 0; j < m; ++j) {
        next[i][j] = h[i][j];
        next[i][j + m] = h[i][j];
        next[i + m][j] = h[i][j];
        next[i + m][j + m] = -h[i][j];
      }
    }
    h = std::move(next);
  }
  return h;
}

TEST(RhtTest, FullDepthMatchesSylvesterMatrix) {
  for (size_t n : {1u, 2u, 4u, 8u, 16u, 64u}) {
    const auto v = RandomValues(n, n);
    const auto spec = RotationSpec::Draw(n, 0, core::SeedSpec{3}, 0);
    const auto rotation =
        RotationSpec::FromSigns(spec.signs(), spec.depth_full());
    const auto out = RhtForward(GradientVector::Pad(v), rotation);
    const auto h = Sylvester(n);
    for (size_t i = 0; i < n; ++i) {
      double want = 0.0;
      for (size_t j = 0; j < n; ++j) want += h[i][j] * rotation.signs()[j] * v[j];
      want /= std::sqrt(static_cast<double>(n));
      EXPECT_NEAR(out[i], want, 1e-5) << "n=" << n << " i=" << i;
    }
  }
}

TEST(RhtTest, PartialEqualsBlockwiseFullRotation) {
  const size_t n = 1024;
  const auto v = RandomValues(n, 11);
  const auto full = RotationSpec::Draw(n, 10, core::SeedSpec{5}, 2);
  for (unsigned depth = 0; depth <= 10; ++depth) {
    const auto partial = RotationSpec::FromSigns(full.signs(), depth);
    const auto out = RhtForward(GradientVector::Pad(v), partial);
    const size_t block = size_t{1} << depth;
    for (size_t start = 0; start < n; start += block) {
      std::vector<float> piece(v.begin() + start, v.begin() + start + block);
      std::vector<int8_t> signs(full.signs().begin() + start,
                                full.signs().begin() + start + block);
      const auto block_out = RhtForward(GradientVector::Pad(piece),
                                        RotationSpec::FromSigns(signs, depth));
      for (size_t i = 0; i < block; ++i) {
        ASSERT_EQ(out[start + i], block_out[i]) << "depth=" << depth;
      }
    }
  }
}

TEST(RhtTest, RoundTripAndNormPreservation) {
  for (unsigned l = 4; l <= 12; l += 4) {
    const size_t n = size_t{1} << l;
    const auto v = GradientVector::Pad(RandomValues(n, l));
    for (unsigned depth : {0u, l / 2, l}) {
      const auto spec = RotationSpec::Draw(n, depth, core::SeedSpec{l}, depth);
      const auto rotated = RhtForward(v, spec);
      EXPECT_NEAR(rotated.SquaredNorm() / v.SquaredNorm(), 1.0, 1e-6);
      const auto back = RhtInverse(rotated, spec);
      for (size_t i = 0; i < n; ++i) ASSERT_NEAR(back[i], v[i], 1e-6);
    }
  }
}

TEST(RhtTest, RotatedVectorUsesPaddedLength) {
  const std::vector<float> v = {3, -1, 2};
  const auto spec = RotationSpec::Draw(4, 2, core::SeedSpec{1}, 0);
  const auto rotated = RhtForward(GradientVector::Pad(v), spec);
  EXPECT_EQ(rotated.logical_len(), 4u);
  const auto back = Truncate(RhtInverse(rotated, spec), 3);
  EXPECT_EQ(back.logical_len(), 3u);
  for (size_t i = 0; i < 3; ++i) EXPECT_NEAR(back[i], v[i], 1e-6);
}

TEST(RhtTest, SignsAreSharedAndRedrawnPerRound) {
  const core::SeedSpec seeds{77};
  const auto a = RotationSpec::Draw(256, 8, seeds, 4);
  const auto b = RotationSpec::Draw(256, 8, seeds, 4);
  const auto c = RotationSpec::Draw(256, 8, seeds, 5);
  EXPECT_EQ(a.signs(), b.signs());
  EXPECT_NE(a.signs(), c.signs());
  for (int8_t s : a.signs()) EXPECT_TRUE(s == 1 || s == -1);
}

TEST(RhtTest, RejectsBadDepth) {
  EXPECT_THROW(RotationSpec::Draw(16, 5, core::SeedSpec{1}, 0),
               InvalidArgument);
  EXPECT_THROW(RotationSpec::FromSigns({1, -1, 1}, 0), InvalidArgument);
}

TEST(PermutationTest, InverseRestoresInput) {
  const auto v = GradientVector::Pad(RandomValues(100, 4));
  const auto perm = Permutation::Draw(100, core::SeedSpec{9}, 3);
  std::vector<uint32_t> sorted = perm.source();
  std::sort(sorted.begin(), sorted.end());
  std::vector<uint32_t> iota(100);
  std::iota(iota.begin(), iota.end(), 0u);
  EXPECT_EQ(sorted, iota);
  const auto p = Permute(v, perm);
  for (size_t k = 0; k < 100; ++k) EXPECT_EQ(p[k], v[perm.source()[k]]);
  EXPECT_EQ(InversePermute(p, perm), v);
  EXPECT_EQ(Permute(v, Permutation::Identity(100)), v);
}

}  // namespace
}  // namespace gradcomp::transforms
