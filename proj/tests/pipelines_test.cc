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

#include "gradcomp/pipelines.h"

#include <cmath>
#include <sstream>

#include "gradcomp/error.h"
#include "gradcomp/metrics.h"
#include "gradcomp/synthetic.h"
#include "gtest/gtest.h"

namespace gradcomp::pipelines {
namespace {

using core::GradientVector;

std::vector<GradientVector> Grads(size_t n, size_t d, uint64_t seed) {
  trainbench::SyntheticGradSpec spec;
  spec.d = d;
  return trainbench::GenWorkerGradients(spec, core::SeedSpec{seed}, n, 0);
}

TEST(TopKCRoundTest, BitsMatchClosedForm) {
  const size_t d = 1 << 14;
  const size_t n = 4;
  const auto grads = Grads(n, d, 1);
  const compress::TopKCConfig config{64, 20, false};
  const auto r = RunTopKCRound(grads, config, collectives::WorkerGroup(n),
                               core::SeedSpec{1}, 0);
  EXPECT_EQ(r.ledger.InputBits(), 16u * (20 * 64 + d / 64));
  EXPECT_TRUE(r.consensus);
  // Only the chosen chunks are non-zero in the estimate.
  size_t nonzero = 0;
  for (size_t i = 0; i < d; ++i) nonzero += r.estimate[i] != 0.0f;
  EXPECT_LE(nonzero, 20u * 64);
  EXPECT_GT(r.nmse, 0.0);
  EXPECT_LT(r.nmse, 1.0);
}

TEST(TopKCRoundTest, FullSelectionIsNearLossless) {
  const size_t d = 1024;
  const auto grads = Grads(2, d, 2);
  const auto r = RunTopKCRound(grads, compress::TopKCConfig{64, 16, true},
                               collectives::WorkerGroup(2),
                               core::SeedSpec{2}, 3);
  EXPECT_LT(r.nmse, 1e-5);
}

TEST(TopKRoundTest, BitsAndSelection) {
  const size_t d = 4096;
  const size_t n = 3;
  const auto grads = Grads(n, d, 3);
  const auto r =
      RunTopKRound(grads, compress::TopKConfig{100}, collectives::WorkerGroup(n));
  EXPECT_EQ(r.ledger.InputBits(), 48u * 100);
  const auto* phase = r.ledger.Find("topk_allgather");
  ASSERT_NE(phase, nullptr);
  EXPECT_EQ(phase->sent[0], 2u * 4800);
  EXPECT_LT(r.nmse, 1.0);
}

TEST(DenseRoundTest, Fp32IsTheMean) {
  const size_t d = 1000;
  const size_t n = 4;
  const auto grads = Grads(n, d, 4);
  const auto r = RunDenseRound(grads, 32, collectives::WorkerGroup(n));
  const auto mean = metrics::ExactMean(grads);
  for (size_t i = 0; i < d; ++i) {
    double scale = 0.0;
    for (const auto& g : grads) scale += std::fabs(g[i]);
    ASSERT_NEAR(r.estimate[i], mean[i], 1e-6 * scale + 1e-7);
  }
  EXPECT_DOUBLE_EQ(r.ledger.BitsPerCoordinate(d), 32.0);
  const auto h = RunDenseRound(grads, 16, collectives::WorkerGroup(n));
  EXPECT_LT(h.nmse, 1e-5);
  EXPECT_DOUBLE_EQ(h.ledger.BitsPerCoordinate(d), 16.0);
}

TEST(ThcRoundTest, ConsensusAndAccuracy) {
  const size_t d = 1 << 14;
  const size_t n = 4;
  const auto grads = Grads(n, d, 5);
  const auto r = RunThcRound(grads, compress::ThcConfig{4, 8, 10},
                             collectives::WorkerGroup(n), core::SeedSpec{5}, 0);
  EXPECT_TRUE(r.consensus);
  EXPECT_EQ(r.overflow.clip_events, 0u);
  EXPECT_LT(r.nmse, 0.05);
  const auto* codes = r.ledger.Find("thc_codes");
  ASSERT_NE(codes, nullptr);
  EXPECT_EQ(codes->input_bits[0], 8u * d);
  ASSERT_EQ(r.local_reconstructions.size(), n);
}

TEST(PowerSgdRoundTest, SmallTensorsGoDense) {
  const size_t n = 2;
  const auto grads = Grads(n, 5000, 6);
  PowerSgdState state;
  const auto r = RunPowerSgdRound(
      grads, compress::PowerSgdConfig{2, true, 4096}, TensorLayout{{4096, 904}},
      collectives::WorkerGroup(n), core::SeedSpec{6}, 0, state);
  ASSERT_NE(r.ledger.Find("powersgd_dense"), nullptr);
  EXPECT_EQ(r.ledger.Find("powersgd_dense")->input_bits[0], 904u * 32);
  EXPECT_EQ(r.ledger.Find("powersgd_p")->input_bits[0], 64u * 2 * 32);
  EXPECT_EQ(r.ledger.Find("powersgd_q")->input_bits[0], 64u * 2 * 32);
  EXPECT_EQ(state.warm_q[0].rows(), 64u);
  EXPECT_EQ(state.warm_q[1].rows(), 0u);
  // The dense tensor is reproduced to FP32 rounding.
  const auto mean = metrics::ExactMean(grads);
  for (size_t i = 4096; i < 5000; ++i) {
    ASSERT_NEAR(r.estimate[i], mean[i], 1e-5);
  }
  EXPECT_THROW(RunPowerSgdRound(grads, compress::PowerSgdConfig{2, true, 4096},
                                TensorLayout{{4096}},
                                collectives::WorkerGroup(n), core::SeedSpec{6},
                                0, state),
               InvalidArgument);
}

// With identical workers and a rank-1 gradient, PowerSGD is exact.
TEST(PowerSgdRoundTest, ExactOnLowRankGradient) {
  std::vector<float> v(64 * 64);
  for (size_t i = 0; i < 64; ++i) {
    for (size_t j = 0; j < 64; ++j) {
      v[i * 64 + j] = static_cast<float>((i % 7) - 3.0) * static_cast<float>(j + 1);
    }
  }
  const std::vector<GradientVector> grads(3, GradientVector::Pad(v));
  PowerSgdState state;
  const auto r = RunPowerSgdRound(
      grads, compress::PowerSgdConfig{1, false, 16}, TensorLayout::Single(4096),
      collectives::WorkerGroup(3), core::SeedSpec{1}, 0, state);
  EXPECT_LT(r.nmse, 1e-8);
}

TEST(AggregatorTest, ErrorFeedbackRecoversDroppedMass) {
  const size_t d = 256;
  const size_t n = 2;
  const auto grads = Grads(n, d, 7);
  Aggregator with(compress::TopKConfig{16}, n, d, core::SeedSpec{7}, true);
  Aggregator without(compress::TopKConfig{16}, n, d, core::SeedSpec{7}, false);
  // Summed over many rounds of a constant gradient, error feedback transmits
  // the full mean while plain TopK keeps dropping the same coordinates.
  std::vector<double> acc_with(d, 0.0), acc_without(d, 0.0);
  const int rounds = 64;
  for (int t = 0; t < rounds; ++t) {
    const auto a = with.Aggregate(grads, t);
    const auto b = without.Aggregate(grads, t);
    for (size_t i = 0; i < d; ++i) {
      acc_with[i] += a.estimate[i];
      acc_without[i] += b.estimate[i];
    }
  }
  const auto mean = metrics::ExactMean(grads);
  double err_with = 0.0, err_without = 0.0, ref = 0.0;
  for (size_t i = 0; i < d; ++i) {
    const double target = rounds * static_cast<double>(mean[i]);
    err_with += std::pow(acc_with[i] - target, 2);
    err_without += std::pow(acc_without[i] - target, 2);
    ref += target * target;
  }
  EXPECT_LT(err_with / ref, 0.05);
  EXPECT_GT(err_without / ref, 0.2);
}

TEST(AggregatorTest, DeterministicAcrossInstances) {
  const size_t d = 4096;
  const auto grads = Grads(4, d, 8);
  const std::vector<compress::CompressorConfig> configs = {
      compress::TopKConfig{50}, compress::TopKCConfig{64, 4, true},
      compress::ThcConfig{4, 4, 8}, compress::PowerSgdConfig{2, true, 16},
      compress::DenseConfig{16}};
  for (const auto& c : configs) {
    Aggregator a(c, 4, d, core::SeedSpec{3}, true);
    Aggregator b(c, 4, d, core::SeedSpec{3}, true);
    for (uint64_t t = 0; t < 3; ++t) {
      const auto ra = a.Aggregate(grads, t);
      const auto rb = b.Aggregate(grads, t);
      ASSERT_EQ(ra.estimate, rb.estimate) << a.kind();
      ASSERT_EQ(ra.ledger.TotalSent(), rb.ledger.TotalSent());
    }
  }
}

TEST(AggregatorTest, RejectsBadInputs) {
  EXPECT_THROW(Aggregator(compress::TopKConfig{0}, 2, 10, core::SeedSpec{1}, true),
               InvalidArgument);
  Aggregator a(compress::DenseConfig{32}, 2, 10, core::SeedSpec{1}, false);
  const auto grads = Grads(3, 10, 1);
  EXPECT_THROW(a.Aggregate(grads, 0), InvalidArgument);
}

TEST(RoundCsvTest, Row) {
  RoundResult r;
  r.nmse = 0.25;
  const size_t p = r.ledger.BeginPhase("x", 1);
  r.ledger.RecordInput(p, 0, 40);
  std::ostringstream out;
  WriteRoundCsvHeader(out);
  WriteRoundCsvRow(out, 3, "thc", r, 10, 1.5);
  EXPECT_EQ(out.str(),
            "round,scheme,nmse,bits_per_coord,overflow_rate,simulated_ms\n"
            "3,thc,0.25,4,0,1.5\n");
}

}  // namespace
}  // namespace gradcomp::pipelines
