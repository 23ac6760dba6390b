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

#ifndef GRADCOMP_PIPELINES_H_
#define GRADCOMP_PIPELINES_H_

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gradcomp/collectives.h"
#include "gradcomp/compressors.h"
#include "gradcomp/powersgd.h"
#include "gradcomp/vectorcore.h"

namespace gradcomp::pipelines {

// Outcome of aggregating one round of worker gradients.
struct RoundResult {
  core::GradientVector estimate;  // aggregated mean gradient
  collectives::TrafficLedger ledger;
  collectives::OverflowStats overflow;
  uint64_t clamp_events = 0;
  // NMSE against the exact mean of the inputs; NaN if that mean is zero.
  double nmse = 0.0;
  // Every worker's reduced buffer was bitwise identical.
  bool consensus = true;
  // Decompression of each worker's own payload, for error feedback.
  std::vector<core::GradientVector> local_reconstructions;
};

// Phase 1: FP16 chunk norms all-reduced; phase 2: the J agreed chunks
// all-reduced in FP16. With config.permute the coordinates are shuffled by a
// shared per-round permutation first.
RoundResult RunTopKCRound(std::span<const core::GradientVector> grads,
                          const compress::TopKCConfig& config,
                          const collectives::WorkerGroup& group,
                          const core::SeedSpec& seeds, uint64_t round);

// Local TopK, all-gather of (index, FP16 value) pairs, scatter-add.
RoundResult RunTopKRound(std::span<const core::GradientVector> grads,
                         const compress::TopKConfig& config,
                         const collectives::WorkerGroup& group);

// Shared rotation, min/max range agreement, stochastic quantization,
// saturating b-bit all-reduce, dequantization and inverse rotation.
RoundResult RunThcRound(std::span<const core::GradientVector> grads,
                        const compress::ThcConfig& config,
                        const collectives::WorkerGroup& group,
                        const core::SeedSpec& seeds, uint64_t round);

// Partition of a flat gradient into parameter tensors, in order.
struct TensorLayout {
  std::vector<size_t> sizes;

  static TensorLayout Single(size_t d) { return TensorLayout{{d}}; }
  size_t total() const;
};

// Shared right factors carried between rounds for warm start.
struct PowerSgdState {
  std::vector<compress::Matrix> warm_q;
};

// All-reduce of P = M Q, orthogonalization, all-reduce of Q = M^T P_hat.
// Tensors below config.min_compress_size (or too thin for the rank) are
// all-reduced uncompressed in FP32.
RoundResult RunPowerSgdRound(std::span<const core::GradientVector> grads,
                             const compress::PowerSgdConfig& config,
                             const TensorLayout& layout,
                             const collectives::WorkerGroup& group,
                             const core::SeedSpec& seeds, uint64_t round,
                             PowerSgdState& state);

// Uncompressed baseline in FP16 or FP32.
RoundResult RunDenseRound(std::span<const core::GradientVector> grads,
                          unsigned precision,
                          const collectives::WorkerGroup& group);

// Stateful per-experiment aggregator: applies error feedback (when enabled
// and the scheme is lossy) around the stateless round functions and keeps
// warm-start state. NMSE is reported against the mean of the raw gradients.
class Aggregator {
 public:
  Aggregator(compress::CompressorConfig config, size_t num_workers, size_t d,
             core::SeedSpec seeds, bool error_feedback,
             TensorLayout layout = {});

  RoundResult Aggregate(std::span<const core::GradientVector> grads,
                        uint64_t round);

  const compress::CompressorConfig& config() const { return config_; }
  std::string kind() const { return compress::SchemeKind(config_); }
  size_t dimension() const { return d_; }

 private:
  compress::CompressorConfig config_;
  collectives::WorkerGroup group_;
  size_t d_;
  core::SeedSpec seeds_;
  bool error_feedback_;
  TensorLayout layout_;
  std::vector<compress::ResidualBuffer> residuals_;
  PowerSgdState powersgd_;
};

// One CSV row per round: round,scheme,nmse,bits_per_coord,overflow_rate,
// simulated_ms.
void WriteRoundCsvHeader(std::ostream& out);
void WriteRoundCsvRow(std::ostream& out, uint64_t round,
                      const std::string& scheme, const RoundResult& result,
                      size_t d, double simulated_ms);

}  // namespace gradcomp::pipelines

#endif  // GRADCOMP_PIPELINES_H_
