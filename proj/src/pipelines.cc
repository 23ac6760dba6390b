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
#include <limits>
#include <numeric>

#include "gradcomp/csv.h"
#include "gradcomp/error.h"
#include "gradcomp/metrics.h"
#include "gradcomp/transforms.h"

namespace gradcomp::pipelines {
namespace {

using collectives::FloatSum;
using collectives::WirePrecision;
using core::GradientVector;

size_t CheckWorkers(std::span<const GradientVector> grads,
                    const collectives::WorkerGroup& group) {
  if (grads.size() != group.size()) {
    throw InvalidArgument("expected " + std::to_string(group.size()) +
                          " worker gradients, got " +
                          std::to_string(grads.size()));
  }
  const size_t d = grads[0].logical_len();
  for (const auto& g : grads) {
    if (g.logical_len() != d) {
      throw InvalidArgument("worker gradients differ in length");
    }
  }
  return d;
}

template <typename T>
bool AllEqual(const std::vector<std::vector<T>>& copies) {
  for (const auto& c : copies) {
    if (c != copies[0]) return false;
  }
  return true;
}

double SafeNmse(const GradientVector& estimate, const GradientVector& ref) {
  try {
    return metrics::Nmse(estimate, ref);
  } catch (const NumericError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

// Scales a length-d float sum by 1/n into a padded gradient.
GradientVector MeanFromSum(std::span<const float> sum, size_t d, size_t n) {
  std::vector<float> out(core::NextPow2(d), 0.0f);
  const float inv = 1.0f / static_cast<float>(n);
  for (size_t i = 0; i < d; ++i) out[i] = sum[i] * inv;
  return GradientVector::FromPadded(std::move(out), d);
}

RoundResult TopKCUnpermuted(std::span<const GradientVector> grads,
                            const compress::TopKCConfig& config,
                            const collectives::WorkerGroup& group) {
  const size_t d = CheckWorkers(grads, group);
  const size_t n = group.size();
  compress::Validate(config, d);
  const core::ChunkGeometry geom(config.chunk_size, d);
  RoundResult result;

  std::vector<std::vector<float>> norms(n);
  for (size_t w = 0; w < n; ++w) {
    norms[w] = core::ChunkSquaredNorms(grads[w], geom);
    for (float& x : norms[w]) x = core::Fp16RoundTrip(x);
  }
  const auto agreed = collectives::RingAllReduce(
      norms, FloatSum{WirePrecision::kFp16}, group, result.ledger,
      "topkc_norms");
  result.consensus &= AllEqual(agreed);

  std::vector<std::vector<uint32_t>> selections(n);
  for (size_t w = 0; w < n; ++w) {
    selections[w] = compress::TopKCSelectChunks(agreed[w], config.num_chunks);
  }
  result.consensus &= AllEqual(selections);
  const auto& chosen = selections[0];

  std::vector<std::vector<float>> values(n);
  for (size_t w = 0; w < n; ++w) {
    const auto payload = compress::GatherChunks(grads[w], geom, chosen);
    values[w].reserve(payload.values.size());
    for (uint16_t h : payload.values) values[w].push_back(core::HalfBitsToFloat(h));
    result.local_reconstructions.push_back(compress::ScatterChunks(payload, d));
  }
  const auto sums = collectives::RingAllReduce(
      values, FloatSum{WirePrecision::kFp16}, group, result.ledger,
      "topkc_values");
  result.consensus &= AllEqual(sums);

  std::vector<float> dense(d, 0.0f);
  for (size_t c = 0; c < chosen.size(); ++c) {
    const size_t p = chosen[c];
    for (size_t i = geom.begin(p); i < geom.end(p); ++i) {
      dense[i] = sums[0][c * geom.chunk_size + (i - geom.begin(p))];
    }
  }
  result.estimate = MeanFromSum(dense, d, n);
  return result;
}

}  // namespace

size_t TensorLayout::total() const {
  return std::accumulate(sizes.begin(), sizes.end(), size_t{0});
}

RoundResult RunTopKCRound(std::span<const GradientVector> grads,
                          const compress::TopKCConfig& config,
                          const collectives::WorkerGroup& group,
                          const core::SeedSpec& seeds, uint64_t round) {
  const size_t d = CheckWorkers(grads, group);
  const GradientVector reference = metrics::ExactMean(grads);
  RoundResult result;
  if (!config.permute) {
    result = TopKCUnpermuted(grads, config, group);
  } else {
    const auto perm = transforms::Permutation::Draw(d, seeds, round);
    std::vector<GradientVector> shuffled;
    shuffled.reserve(grads.size());
    for (const auto& g : grads) shuffled.push_back(transforms::Permute(g, perm));
    result = TopKCUnpermuted(shuffled, config, group);
    result.estimate = transforms::InversePermute(result.estimate, perm);
    for (auto& r : result.local_reconstructions) {
      r = transforms::InversePermute(r, perm);
    }
  }
  result.nmse = SafeNmse(result.estimate, reference);
  return result;
}

RoundResult RunTopKRound(std::span<const GradientVector> grads,
                         const compress::TopKConfig& config,
                         const collectives::WorkerGroup& group) {
  const size_t d = CheckWorkers(grads, group);
  const size_t n = group.size();
  compress::Validate(config, d);
  RoundResult result;

  std::vector<compress::SparsePayload> payloads;
  payloads.reserve(n);
  for (size_t w = 0; w < n; ++w) {
    payloads.push_back(compress::TopKCompress(grads[w], config.k));
    result.local_reconstructions.push_back(
        compress::SparseDecompress(payloads.back(), d));
  }
  const auto gathered = collectives::AllGather<compress::SparsePayload>(
      payloads,
      [](const compress::SparsePayload& p) {
        return compress::PayloadBits(compress::CompressedPayload(p));
      },
      group, result.ledger, "topk_allgather");

  std::vector<float> sum(d, 0.0f);
  for (const auto& p : gathered) {
    for (size_t k = 0; k < p.indices.size(); ++k) {
      sum[p.indices[k]] += core::HalfBitsToFloat(p.values[k]);
    }
  }
  result.estimate = MeanFromSum(sum, d, n);
  result.nmse = SafeNmse(result.estimate, metrics::ExactMean(grads));
  return result;
}

RoundResult RunThcRound(std::span<const GradientVector> grads,
                        const compress::ThcConfig& config,
                        const collectives::WorkerGroup& group,
                        const core::SeedSpec& seeds, uint64_t round) {
  const size_t d = CheckWorkers(grads, group);
  const size_t n = group.size();
  compress::Validate(config, d);
  RoundResult result;

  const size_t padded = grads[0].padded_len();
  const auto rotation =
      transforms::RotationSpec::Draw(padded, config.depth, seeds, round);
  const size_t block = rotation.block_size();

  std::vector<GradientVector> rotated;
  std::vector<std::vector<float>> lows(n), highs(n);
  for (size_t w = 0; w < n; ++w) {
    rotated.push_back(transforms::RhtForward(grads[w], rotation));
    for (const auto& r : compress::BlockRanges(rotated.back(), block)) {
      lows[w].push_back(r.lo);
      highs[w].push_back(r.hi);
    }
  }
  const auto min_all = collectives::RingAllReduce(
      lows, collectives::ElemMin{}, group, result.ledger, "thc_range_min");
  const auto max_all = collectives::RingAllReduce(
      highs, collectives::ElemMax{}, group, result.ledger, "thc_range_max");
  result.consensus &= AllEqual(min_all) && AllEqual(max_all);
  std::vector<compress::QuantRange> ranges(min_all[0].size());
  for (size_t p = 0; p < ranges.size(); ++p) {
    ranges[p] = compress::QuantRange{min_all[0][p], max_all[0][p]};
  }

  std::vector<std::vector<int32_t>> codes(n);
  double code_sq = 0.0;
  for (size_t w = 0; w < n; ++w) {
    core::Rng rng(seeds, core::StreamTag::kQuantRounding, round,
                  static_cast<uint32_t>(w));
    auto quantized =
        compress::ThcQuantize(rotated[w], block, ranges, config.q, rng);
    result.clamp_events += quantized.clamped;
    codes[w].assign(quantized.payload.codes.begin(),
                    quantized.payload.codes.end());
    for (int32_t z : codes[w]) code_sq += static_cast<double>(z) * z;
    const auto own = compress::ThcDequantize(codes[w], ranges, block, config.q, 1);
    result.local_reconstructions.push_back(
        transforms::Truncate(transforms::RhtInverse(own, rotation), d));
  }
  result.overflow.code_sigma =
      std::sqrt(code_sq / static_cast<double>(n * padded));

  const auto sums = collectives::RingAllReduce(
      codes, collectives::SatIntSum{config.b}, group, result.ledger,
      "thc_codes", result.overflow);
  result.consensus &= AllEqual(sums);

  const auto aggregate =
      compress::ThcDequantize(sums[0], ranges, block, config.q, n);
  const auto restored =
      transforms::Truncate(transforms::RhtInverse(aggregate, rotation), d);
  result.estimate = MeanFromSum(restored.logical(), d, n);
  result.nmse = SafeNmse(result.estimate, metrics::ExactMean(grads));
  return result;
}

RoundResult RunPowerSgdRound(std::span<const GradientVector> grads,
                             const compress::PowerSgdConfig& config,
                             const TensorLayout& layout,
                             const collectives::WorkerGroup& group,
                             const core::SeedSpec& seeds, uint64_t round,
                             PowerSgdState& state) {
  const size_t d = CheckWorkers(grads, group);
  const size_t n = group.size();
  compress::Validate(config, d);
  if (layout.total() != d) {
    throw InvalidArgument("tensor layout covers " +
                          std::to_string(layout.total()) +
                          " coordinates, gradient has " + std::to_string(d));
  }
  const size_t num_tensors = layout.sizes.size();
  state.warm_q.resize(num_tensors);
  RoundResult result;

  struct Tensor {
    size_t offset;
    size_t size;
    bool compressed;
    compress::MatrixShape shape;
  };
  std::vector<Tensor> tensors;
  size_t offset = 0;
  for (size_t size : layout.sizes) {
    const auto shape = compress::MostSquareShape(size);
    const bool compressed =
        size >= config.min_compress_size && shape.rows >= config.rank;
    tensors.push_back(Tensor{offset, size, compressed, shape});
    offset += size;
  }

  auto as_matrix = [&](const GradientVector& g, const Tensor& t) {
    compress::Matrix m(t.shape.rows, t.shape.cols);
    std::copy_n(g.values().begin() + t.offset, t.size, m.data().begin());
    return m;
  };

  // Shared right factors for this round.
  std::vector<compress::Matrix> q(num_tensors);
  for (size_t t = 0; t < num_tensors; ++t) {
    if (!tensors[t].compressed) continue;
    const size_t cols = tensors[t].shape.cols;
    unsigned attempt = 0;
    const auto& warm = state.warm_q[t];
    const bool reuse = config.warm_start && warm.rows() == cols &&
                       warm.cols() == config.rank;
    auto draw = [&] {
      return compress::DrawSharedFactor(seeds, t, round, attempt++, cols,
                                        config.rank);
    };
    q[t] = compress::EnsureFullColumnRank(reuse ? warm : draw(), draw);
  }

  // Phase 1: P_i = M_i Q for every compressed tensor, concatenated.
  std::vector<std::vector<compress::Matrix>> mats(n);
  std::vector<std::vector<float>> p_local(n), dense_local(n);
  for (size_t w = 0; w < n; ++w) {
    mats[w].resize(num_tensors);
    for (size_t t = 0; t < num_tensors; ++t) {
      const Tensor& tensor = tensors[t];
      if (!tensor.compressed) {
        const auto seg = grads[w].values().subspan(tensor.offset, tensor.size);
        dense_local[w].insert(dense_local[w].end(), seg.begin(), seg.end());
        continue;
      }
      mats[w][t] = as_matrix(grads[w], tensor);
      const auto p = compress::MatMul(mats[w][t], q[t]);
      p_local[w].insert(p_local[w].end(), p.data().begin(), p.data().end());
    }
  }
  const bool any_compressed = !p_local[0].empty();
  std::vector<std::vector<float>> p_sum, q_sum, dense_sum;
  if (any_compressed) {
    p_sum = collectives::RingAllReduce(p_local, FloatSum{}, group,
                                       result.ledger, "powersgd_p");
    result.consensus &= AllEqual(p_sum);
  }

  // Orthogonalize the agreed P factors; identical on every worker.
  std::vector<compress::Matrix> p_hat(num_tensors);
  size_t cursor = 0;
  for (size_t t = 0; t < num_tensors; ++t) {
    if (!tensors[t].compressed) continue;
    const size_t count = tensors[t].shape.rows * config.rank;
    p_hat[t] = compress::Matrix(
        tensors[t].shape.rows, config.rank,
        std::vector<float>(p_sum[0].begin() + cursor,
                           p_sum[0].begin() + cursor + count));
    compress::Orthogonalize(p_hat[t]);
    cursor += count;
  }

  // Phase 2: Q_i = M_i^T P_hat.
  std::vector<std::vector<compress::Matrix>> q_local_mats(n);
  std::vector<std::vector<float>> q_local(n);
  for (size_t w = 0; w < n; ++w) {
    q_local_mats[w].resize(num_tensors);
    for (size_t t = 0; t < num_tensors; ++t) {
      if (!tensors[t].compressed) continue;
      q_local_mats[w][t] = compress::MatTransposeMul(mats[w][t], p_hat[t]);
      const auto& qm = q_local_mats[w][t];
      q_local[w].insert(q_local[w].end(), qm.data().begin(), qm.data().end());
    }
  }
  if (any_compressed) {
    q_sum = collectives::RingAllReduce(q_local, FloatSum{}, group,
                                       result.ledger, "powersgd_q");
    result.consensus &= AllEqual(q_sum);
  }
  if (!dense_local[0].empty()) {
    dense_sum = collectives::RingAllReduce(dense_local, FloatSum{}, group,
                                           result.ledger, "powersgd_dense");
    result.consensus &= AllEqual(dense_sum);
  }

  std::vector<float> sum(d, 0.0f);
  std::vector<std::vector<float>> local(n, std::vector<float>(d, 0.0f));
  cursor = 0;
  size_t dense_cursor = 0;
  for (size_t t = 0; t < num_tensors; ++t) {
    const Tensor& tensor = tensors[t];
    if (!tensor.compressed) {
      for (size_t i = 0; i < tensor.size; ++i) {
        sum[tensor.offset + i] = dense_sum[0][dense_cursor + i];
        for (size_t w = 0; w < n; ++w) {
          local[w][tensor.offset + i] = dense_local[w][dense_cursor + i];
        }
      }
      dense_cursor += tensor.size;
      continue;
    }
    const size_t count = tensor.shape.cols * config.rank;
    compress::Matrix q_agg(
        tensor.shape.cols, config.rank,
        std::vector<float>(q_sum[0].begin() + cursor,
                           q_sum[0].begin() + cursor + count));
    cursor += count;
    const auto approx = compress::MatMulTranspose(p_hat[t], q_agg);
    std::copy_n(approx.data().begin(), tensor.size, sum.begin() + tensor.offset);
    for (size_t w = 0; w < n; ++w) {
      const auto own = compress::MatMulTranspose(p_hat[t], q_local_mats[w][t]);
      std::copy_n(own.data().begin(), tensor.size,
                  local[w].begin() + tensor.offset);
    }
    if (config.warm_start) state.warm_q[t] = std::move(q_agg);
  }
  for (size_t w = 0; w < n; ++w) {
    result.local_reconstructions.push_back(GradientVector::Pad(local[w]));
  }
  result.estimate = MeanFromSum(sum, d, n);
  result.nmse = SafeNmse(result.estimate, metrics::ExactMean(grads));
  return result;
}

RoundResult RunDenseRound(std::span<const GradientVector> grads,
                          unsigned precision,
                          const collectives::WorkerGroup& group) {
  const size_t d = CheckWorkers(grads, group);
  const size_t n = group.size();
  compress::Validate(compress::DenseConfig{precision}, d);
  const bool half = precision == 16;
  RoundResult result;

  std::vector<std::vector<float>> values(n);
  for (size_t w = 0; w < n; ++w) {
    values[w] = grads[w].ToVector();
    if (half) {
      for (float& x : values[w]) x = core::Fp16RoundTrip(x);
    }
    result.local_reconstructions.push_back(GradientVector::Pad(values[w]));
  }
  const auto sums = collectives::RingAllReduce(
      values, FloatSum{half ? WirePrecision::kFp16 : WirePrecision::kFp32},
      group, result.ledger, half ? "dense_fp16" : "dense_fp32");
  result.consensus &= AllEqual(sums);
  result.estimate = MeanFromSum(sums[0], d, n);
  result.nmse = SafeNmse(result.estimate, metrics::ExactMean(grads));
  return result;
}

Aggregator::Aggregator(compress::CompressorConfig config, size_t num_workers,
                       size_t d, core::SeedSpec seeds, bool error_feedback,
                       TensorLayout layout)
    : config_(std::move(config)),
      group_(num_workers),
      d_(d),
      seeds_(seeds),
      error_feedback_(error_feedback),
      layout_(layout.sizes.empty() ? TensorLayout::Single(d)
                                   : std::move(layout)) {
  compress::Validate(config_, d_);
  if (layout_.total() != d_) {
    throw InvalidArgument("tensor layout does not cover the gradient");
  }
  // Dense baselines are (near) lossless and never carry a residual.
  if (std::holds_alternative<compress::DenseConfig>(config_)) {
    error_feedback_ = false;
  }
  if (error_feedback_) {
    residuals_.assign(num_workers, compress::ResidualBuffer(d_));
  }
}

RoundResult Aggregator::Aggregate(std::span<const GradientVector> grads,
                                  uint64_t round) {
  CheckWorkers(grads, group_);
  std::vector<GradientVector> corrected;
  std::span<const GradientVector> inputs = grads;
  if (error_feedback_) {
    corrected.reserve(grads.size());
    for (size_t w = 0; w < grads.size(); ++w) {
      corrected.push_back(residuals_[w].Apply(grads[w]));
    }
    inputs = corrected;
  }

  RoundResult result = std::visit(
      [&](const auto& c) -> RoundResult {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, compress::TopKConfig>) {
          return RunTopKRound(inputs, c, group_);
        } else if constexpr (std::is_same_v<T, compress::TopKCConfig>) {
          return RunTopKCRound(inputs, c, group_, seeds_, round);
        } else if constexpr (std::is_same_v<T, compress::ThcConfig>) {
          return RunThcRound(inputs, c, group_, seeds_, round);
        } else if constexpr (std::is_same_v<T, compress::PowerSgdConfig>) {
          return RunPowerSgdRound(inputs, c, layout_, group_, seeds_, round,
                                  powersgd_);
        } else {
          return RunDenseRound(inputs, c.precision, group_);
        }
      },
      config_);

  if (error_feedback_) {
    for (size_t w = 0; w < grads.size(); ++w) {
      residuals_[w].Update(inputs[w], result.local_reconstructions[w]);
    }
    result.nmse = SafeNmse(result.estimate, metrics::ExactMean(grads));
  }
  return result;
}

void WriteRoundCsvHeader(std::ostream& out) {
  out << "round,scheme,nmse,bits_per_coord,overflow_rate,simulated_ms\n";
}

void WriteRoundCsvRow(std::ostream& out, uint64_t round,
                      const std::string& scheme, const RoundResult& result,
                      size_t d, double simulated_ms) {
  const double overflow =
      result.overflow.total_adds == 0 ? 0.0 : metrics::OverflowRate(result.overflow);
  out << round << ',' << scheme << ',' << FormatDouble(result.nmse) << ','
      << FormatDouble(result.ledger.BitsPerCoordinate(d)) << ','
      << FormatDouble(overflow) << ',' << FormatDouble(simulated_ms) << '\n';
}

}  // namespace gradcomp::pipelines
