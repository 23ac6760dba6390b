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

#include "gradcomp/compressors.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gradcomp/error.h"
#include "gtest/gtest.h"

namespace gradcomp::compress {
namespace {

using core::GradientVector;

std::vector<float> RandomValues(size_t n, uint64_t seed) {
  core::Rng rng(seed);
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.Normal());
  return v;
}

// Stable sort by descending magnitude keeps lower indices first on ties.
std::vector<uint32_t> SortOracle(std::span<const float> v, size_t k) {
  std::vector<uint32_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0u);
  std::stable_sort(idx.begin(), idx.end(), [&](uint32_t a, uint32_t b) {
    return std::fabs(v[a]) > std::fabs(v[b]);
  });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

TEST(TopKSelectTest, MatchesSortOracle) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const auto v = RandomValues(500 + seed, seed);
    for (size_t k : {size_t{1}, size_t{17}, size_t{250}, v.size()}) {
      EXPECT_EQ(TopKSelect(v, k), SortOracle(v, k));
    }
  }
}

TEST(TopKSelectTest, TiesGoToLowerIndex) {
  const std::vector<float> v = {1, -3, 3, 2, -3, 0};
  EXPECT_EQ(TopKSelect(v, 2), (std::vector<uint32_t>{1, 2}));
  EXPECT_EQ(TopKSelect(v, 3), (std::vector<uint32_t>{1, 2, 4}));
  EXPECT_THROW(TopKSelect(v, 0), InvalidArgument);
  EXPECT_THROW(TopKSelect(v, 7), InvalidArgument);
}

TEST(TopKCTest, SelectChunksMatchesSortOracle) {
  std::vector<float> norms = RandomValues(300, 4);
  for (float& x : norms) x = x * x;
  EXPECT_EQ(TopKCSelectChunks(norms, 30), SortOracle(norms, 30));
  const std::vector<float> tied = {2, 5, 5, 1};
  EXPECT_EQ(TopKCSelectChunks(tied, 1), (std::vector<uint32_t>{1}));
}

TEST(BudgetTest, ClosedForms) {
  const size_t d = size_t{1} << 20;
  EXPECT_EQ(TopKForBits(8.0, d), 174763u);
  EXPECT_EQ(TopKCChunksForBits(8.0, d, 64), 7936u);
  // 16 (J C / d + 1 / C) == 8 exactly at J = 7936.
  EXPECT_DOUBLE_EQ(16.0 * (7936.0 * 64 / d + 1.0 / 64), 8.0);
  EXPECT_EQ(TopKForBits(0.001, 100), 1u);
  EXPECT_EQ(TopKCChunksForBits(64.0, 1000, 10), 100u);
}

TEST(ChunkTest, GatherScatterShortChunk) {
  const std::vector<float> v = {1, 2, 3, 4, 5, 6, 7};
  const auto g = GradientVector::Pad(v);
  const core::ChunkGeometry geom(3, 7);
  const std::vector<uint32_t> ids = {0, 2};
  const auto payload = GatherChunks(g, geom, ids);
  EXPECT_EQ(payload.values.size(), 6u);
  EXPECT_EQ(core::HalfBitsToFloat(payload.values[3]), 7.0f);
  EXPECT_EQ(payload.values[4], 0);
  EXPECT_EQ(PayloadBits(payload), 96u);
  const auto back = ScatterChunks(payload, 7);
  EXPECT_EQ(back.ToVector(), (std::vector<float>{1, 2, 3, 0, 0, 0, 7}));
}

TEST(SparseTest, CompressDecompress) {
  const std::vector<float> v = {0.1f, -4.0f, 0.2f, 3.0f};
  const auto p = TopKCompress(GradientVector::Pad(v), 2);
  EXPECT_EQ(p.indices, (std::vector<uint32_t>{1, 3}));
  EXPECT_EQ(PayloadBits(p), 96u);
  EXPECT_EQ(SparseDecompress(p, 4).ToVector(),
            (std::vector<float>{0, -4, 0, 3}));
}

TEST(QuantGridTest, Geometry) {
  const QuantGrid g{-1.0, 1.0, 4};
  EXPECT_EQ(g.max_code(), 7);
  EXPECT_DOUBLE_EQ(g.step(), 2.0 / 14.0);
  EXPECT_DOUBLE_EQ(g.mid(), 0.0);
  EXPECT_EQ((ThcConfig{4, 4, 10}.levels()), 15u);
}

TEST(ThcQuantizeTest, GridPointsAreExact) {
  // Range [-3, 3] with q = 3 has unit step, so levels are exact floats.
  std::vector<float> v;
  for (int z = -3; z <= 3; ++z) v.push_back(static_cast<float>(z));
  v.push_back(0.0f);
  const auto rotated = GradientVector::Pad(v);
  const std::vector<QuantRange> ranges = {{-3.0f, 3.0f}};
  core::Rng rng(1);
  const auto r = ThcQuantize(rotated, 8, ranges, 3, rng);
  for (int z = -3; z <= 3; ++z) EXPECT_EQ(r.payload.codes[z + 3], z);
  EXPECT_EQ(r.clamped, 0u);
}

TEST(ThcQuantizeTest, DegenerateRangeAndClamping) {
  const auto rotated = GradientVector::Pad(std::vector<float>{2, 2, 5, -9});
  core::Rng rng(1);
  const std::vector<QuantRange> flat = {{2.0f, 2.0f}};
  const auto r0 = ThcQuantize(rotated, 4, flat, 4, rng);
  for (int8_t c : r0.payload.codes) EXPECT_EQ(c, 0);
  const std::vector<QuantRange> narrow = {{-1.0f, 1.0f}};
  const auto r1 = ThcQuantize(rotated, 4, narrow, 4, rng);
  EXPECT_EQ(r1.clamped, 4u);
  EXPECT_EQ(r1.payload.codes[2], 7);
  EXPECT_EQ(r1.payload.codes[3], -7);
}

TEST(ThcQuantizeTest, ConsumesOneUniformPerCoordinate) {
  const auto rotated = GradientVector::Pad(RandomValues(64, 2));
  const auto ranges = BlockRanges(rotated, 16);
  core::Rng a(5);
  ThcQuantize(rotated, 16, ranges, 4, a);
  core::Rng b(5);
  for (int i = 0; i < 64; ++i) b.Uniform();
  EXPECT_EQ(a.NextU64(), b.NextU64());
}

// Monte-Carlo mean of the dequantized value stays within 4 sigma of x.
TEST(ThcQuantizeTest, Unbiased) {
  const std::vector<QuantRange> ranges = {{-2.0f, 3.0f}};
  core::Rng pick(99);
  for (unsigned q : {2u, 4u}) {
    for (int point = 0; point < 4; ++point) {
      const float x = static_cast<float>(-2.0 + 5.0 * pick.Uniform());
      const auto rotated = GradientVector::Pad(std::vector<float>{x});
      core::Rng rng(1000 * q + point);
      const int draws = 20000;
      double sum = 0.0;
      for (int i = 0; i < draws; ++i) {
        const auto r = ThcQuantize(rotated, 1, ranges, q, rng);
        const std::vector<int32_t> codes = {r.payload.codes[0]};
        sum += ThcDequantize(codes, ranges, 1, q, 1)[0];
      }
      const QuantGrid g{-2.0, 3.0, q};
      const double t = (x - g.lo) / g.step();
      const double f = t - std::floor(t);
      const double sigma = g.step() * std::sqrt(f * (1.0 - f) / draws);
      EXPECT_NEAR(sum / draws, x, 4.0 * sigma + 1e-6) << "q=" << q;
    }
  }
}

TEST(ThcDequantizeTest, SumsOfCodes) {
  const std::vector<QuantRange> ranges = {{0.0f, 2.0f}};
  const std::vector<int32_t> sums = {0, 3, -5, 2};
  const auto out = ThcDequantize(sums, ranges, 4, 2, 3);
  // n * mid + step * z with mid = 1, step = 1.
  EXPECT_EQ(out.ToVector(), (std::vector<float>{3, 6, -2, 5}));
}

TEST(ValidateTest, RejectsBadConfigs) {
  EXPECT_THROW(Validate(TopKConfig{0}, 10), InvalidArgument);
  EXPECT_THROW(Validate(TopKConfig{11}, 10), InvalidArgument);
  EXPECT_THROW(Validate(TopKCConfig{4, 4, false}, 10), InvalidArgument);
  EXPECT_NO_THROW(Validate(TopKCConfig{4, 3, false}, 10));
  EXPECT_THROW(Validate(ThcConfig{4, 3, 2}, 16), InvalidArgument);
  EXPECT_THROW(Validate(ThcConfig{4, 4, 5}, 16), InvalidArgument);
  EXPECT_THROW(Validate(DenseConfig{8}, 16), InvalidArgument);
  EXPECT_EQ(SchemeKind(TopKCConfig{4, 1, true}), "topkc_perm");
  EXPECT_EQ(SchemeKind(DenseConfig{16}), "fp16");
}

TEST(PayloadCodecTest, RoundTripsEveryKind) {
  const std::vector<CompressedPayload> payloads = {
      SparsePayload{{1, 5, 9}, {0x3C00, 0xC000, 0x0001}},
      ChunkSetPayload{64, {0, 3}, std::vector<uint16_t>(128, 0x1234)},
      QuantPayload{4, 8, 77, {-7, 0, 7, 3, -1, 2, 1, 0},
                   {{-1.5f, 2.25f}}},
      LowRankPayload{2, 3, 1, {1.0f, -2.0f}, {0.5f, 0.25f, -0.125f}},
      DensePayload{16, {1.0f, -0.5f}},
      DensePayload{32, {3.14159f, 1e-30f}},
  };
  for (const auto& p : payloads) {
    const auto bytes = EncodePayload(p);
    EXPECT_EQ(DecodePayload(bytes), p);
  }
}

TEST(PayloadCodecTest, LittleEndianLayout) {
  const auto bytes = EncodePayload(SparsePayload{{0x01020304}, {0x3C00}});
  const std::vector<uint8_t> want = {0, 1, 0, 0, 0, 4, 3, 2, 1, 0x00, 0x3C};
  EXPECT_EQ(bytes, want);
}

TEST(PayloadCodecTest, RejectsMalformedInput) {
  auto bytes = EncodePayload(SparsePayload{{1, 2}, {3, 4}});
  EXPECT_THROW(DecodePayload(std::span(bytes).first(bytes.size() - 1)),
               InvalidArgument);
  bytes.push_back(0);
  EXPECT_THROW(DecodePayload(bytes), InvalidArgument);
  const std::vector<uint8_t> bad_tag = {9};
  EXPECT_THROW(DecodePayload(bad_tag), InvalidArgument);
  EXPECT_THROW(DecodePayload(std::span<const uint8_t>()), InvalidArgument);
}

TEST(ResidualBufferTest, CarriesCompressionError) {
  ResidualBuffer buf(3);
  const auto g = GradientVector::Pad(std::vector<float>{1, 2, 3});
  const auto corrected = buf.Apply(g);
  EXPECT_EQ(corrected, g);
  buf.Update(corrected, GradientVector::Pad(std::vector<float>{1, 0, 3}));
  EXPECT_EQ(buf.residual().ToVector(), (std::vector<float>{0, 2, 0}));
  EXPECT_EQ(buf.Apply(g).ToVector(), (std::vector<float>{1, 4, 3}));
}

}  // namespace
}  // namespace gradcomp::compress
