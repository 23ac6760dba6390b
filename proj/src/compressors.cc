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

namespace gradcomp::compress {
namespace {

// Indices of the `k` largest keys, ties to the lower index, ascending.
template <typename KeyFn>
std::vector<uint32_t> SelectLargest(size_t n, size_t k, KeyFn key) {
  std::vector<uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  auto before = [&](uint32_t a, uint32_t b) {
    const float ka = key(a);
    const float kb = key(b);
    if (ka != kb) return ka > kb;
    return a < b;
  };
  if (k < n) {
    std::nth_element(order.begin(), order.begin() + k, order.end(), before);
    order.resize(k);
  }
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace

void Validate(const CompressorConfig& config, size_t d) {
  if (d == 0) throw InvalidArgument("dimension must be positive");
  std::visit(
      [d](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, TopKConfig>) {
          if (c.k < 1 || c.k > d) {
            throw InvalidArgument("TopK needs 1 <= K <= d, got K=" +
                                  std::to_string(c.k));
          }
        } else if constexpr (std::is_same_v<T, TopKCConfig>) {
          if (c.chunk_size < 1) throw InvalidArgument("chunk size must be >= 1");
          const size_t chunks = (d + c.chunk_size - 1) / c.chunk_size;
          if (c.num_chunks < 1 || c.num_chunks > chunks) {
            throw InvalidArgument("TopKC needs 1 <= J <= " +
                                  std::to_string(chunks) + ", got J=" +
                                  std::to_string(c.num_chunks));
          }
        } else if constexpr (std::is_same_v<T, ThcConfig>) {
          if (c.q < 2 || c.q > 8) {
            throw InvalidArgument("THC needs 2 <= q <= 8, got q=" +
                                  std::to_string(c.q));
          }
          if (c.b < c.q || c.b > 31) {
            throw InvalidArgument("THC needs q <= b <= 31, got b=" +
                                  std::to_string(c.b));
          }
          if ((size_t{1} << c.depth) > core::NextPow2(d)) {
            throw InvalidArgument("THC rotation depth " +
                                  std::to_string(c.depth) +
                                  " exceeds the padded dimension");
          }
        } else if constexpr (std::is_same_v<T, PowerSgdConfig>) {
          if (c.rank < 1) throw InvalidArgument("PowerSGD rank must be >= 1");
        } else {
          if (c.precision != 16 && c.precision != 32) {
            throw InvalidArgument("dense precision must be 16 or 32");
          }
        }
      },
      config);
}

std::string SchemeKind(const CompressorConfig& config) {
  return std::visit(
      [](const auto& c) -> std::string {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, TopKConfig>) return "topk";
        if constexpr (std::is_same_v<T, TopKCConfig>) {
          return c.permute ? "topkc_perm" : "topkc";
        }
        if constexpr (std::is_same_v<T, ThcConfig>) return "thc";
        if constexpr (std::is_same_v<T, PowerSgdConfig>) return "powersgd";
        if constexpr (std::is_same_v<T, DenseConfig>) {
          return c.precision == 16 ? "fp16" : "fp32";
        }
      },
      config);
}

size_t TopKForBits(double bits, size_t d) {
  const double k = std::round(bits * static_cast<double>(d) / 48.0);
  return std::clamp<size_t>(static_cast<size_t>(std::max(k, 1.0)), 1, d);
}

size_t TopKCChunksForBits(double bits, size_t d, size_t chunk_size) {
  const double c = static_cast<double>(chunk_size);
  const double j =
      std::round((bits / 16.0 - 1.0 / c) * static_cast<double>(d) / c);
  const size_t chunks = (d + chunk_size - 1) / chunk_size;
  return std::clamp<size_t>(static_cast<size_t>(std::max(j, 1.0)), 1, chunks);
}

uint64_t PayloadBits(const CompressedPayload& payload) {
  return std::visit(
      [](const auto& p) -> uint64_t {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SparsePayload>) {
          return 48ull * p.indices.size();
        } else if constexpr (std::is_same_v<T, ChunkSetPayload>) {
          return 16ull * p.values.size();
        } else if constexpr (std::is_same_v<T, QuantPayload>) {
          return uint64_t{p.q} * p.codes.size() + 64ull * p.ranges.size();
        } else if constexpr (std::is_same_v<T, LowRankPayload>) {
          return 32ull * p.rank * (uint64_t{p.rows} + p.cols);
        } else {
          return uint64_t{p.precision} * p.values.size();
        }
      },
      payload);
}

std::vector<uint32_t> TopKSelect(std::span<const float> values, size_t k) {
  if (k < 1 || k > values.size()) {
    throw InvalidArgument("TopK needs 1 <= K <= d, got K=" +
                          std::to_string(k));
  }
  return SelectLargest(values.size(), k,
                       [&](uint32_t i) { return std::fabs(values[i]); });
}

std::vector<uint32_t> TopKCSelectChunks(std::span<const float> norms,
                                        size_t j) {
  if (j < 1 || j > norms.size()) {
    throw InvalidArgument("TopKC needs 1 <= J <= num_chunks, got J=" +
                          std::to_string(j));
  }
  return SelectLargest(norms.size(), j, [&](uint32_t p) { return norms[p]; });
}

SparsePayload TopKCompress(const core::GradientVector& v, size_t k) {
  SparsePayload out;
  out.indices = TopKSelect(v.logical(), k);
  out.values.reserve(k);
  for (uint32_t i : out.indices) out.values.push_back(core::FloatToHalfBits(v[i]));
  return out;
}

core::GradientVector SparseDecompress(const SparsePayload& payload,
                                      size_t logical_len) {
  std::vector<float> dense(core::NextPow2(logical_len), 0.0f);
  for (size_t k = 0; k < payload.indices.size(); ++k) {
    const uint32_t i = payload.indices[k];
    if (i >= logical_len) throw InvalidArgument("sparse index out of range");
    dense[i] = core::HalfBitsToFloat(payload.values[k]);
  }
  return core::GradientVector::FromPadded(std::move(dense), logical_len);
}

ChunkSetPayload GatherChunks(const core::GradientVector& v,
                             const core::ChunkGeometry& geom,
                             std::span<const uint32_t> chunk_ids) {
  ChunkSetPayload out;
  out.chunk_size = static_cast<uint32_t>(geom.chunk_size);
  out.chunk_ids.assign(chunk_ids.begin(), chunk_ids.end());
  out.values.assign(chunk_ids.size() * geom.chunk_size, 0);
  for (size_t c = 0; c < chunk_ids.size(); ++c) {
    const size_t p = chunk_ids[c];
    if (p >= geom.num_chunks()) throw InvalidArgument("chunk id out of range");
    for (size_t i = geom.begin(p); i < geom.end(p); ++i) {
      out.values[c * geom.chunk_size + (i - geom.begin(p))] =
          core::FloatToHalfBits(v[i]);
    }
  }
  return out;
}

core::GradientVector ScatterChunks(const ChunkSetPayload& payload,
                                   size_t logical_len) {
  const core::ChunkGeometry geom(payload.chunk_size, logical_len);
  std::vector<float> dense(core::NextPow2(logical_len), 0.0f);
  for (size_t c = 0; c < payload.chunk_ids.size(); ++c) {
    const size_t p = payload.chunk_ids[c];
    if (p >= geom.num_chunks()) throw InvalidArgument("chunk id out of range");
    for (size_t i = geom.begin(p); i < geom.end(p); ++i) {
      dense[i] = core::HalfBitsToFloat(
          payload.values[c * geom.chunk_size + (i - geom.begin(p))]);
    }
  }
  return core::GradientVector::FromPadded(std::move(dense), logical_len);
}

std::vector<QuantRange> BlockRanges(const core::GradientVector& rotated,
                                    size_t block_size) {
  if (block_size == 0 || rotated.padded_len() % block_size != 0) {
    throw InvalidArgument("block size must divide the rotated length");
  }
  std::vector<QuantRange> out(rotated.padded_len() / block_size);
  for (size_t p = 0; p < out.size(); ++p) {
    const auto block = rotated.values().subspan(p * block_size, block_size);
    const auto [lo, hi] = std::minmax_element(block.begin(), block.end());
    out[p] = QuantRange{*lo, *hi};
  }
  return out;
}

QuantizeResult ThcQuantize(const core::GradientVector& rotated,
                           size_t block_size,
                           std::span<const QuantRange> shared_ranges,
                           unsigned q, core::Rng& rng) {
  if (q < 2 || q > 8) {
    throw InvalidArgument("quantization needs 2 <= q <= 8, got q=" +
                          std::to_string(q));
  }
  if (block_size == 0 || rotated.padded_len() % block_size != 0 ||
      shared_ranges.size() != rotated.padded_len() / block_size) {
    throw InvalidArgument("quantization ranges do not match the block layout");
  }
  QuantizeResult result;
  QuantPayload& out = result.payload;
  out.q = static_cast<uint8_t>(q);
  out.block_size = static_cast<uint32_t>(block_size);
  out.ranges.assign(shared_ranges.begin(), shared_ranges.end());
  out.codes.resize(rotated.padded_len());

  for (size_t p = 0; p < shared_ranges.size(); ++p) {
    const QuantRange r = shared_ranges[p];
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.hi < r.lo) {
      throw NumericError("invalid quantization range for block " +
                         std::to_string(p));
    }
    const QuantGrid grid{r.lo, r.hi, q};
    const int32_t top = grid.max_code();
    const double levels_span = 2.0 * top;
    for (size_t i = p * block_size; i < (p + 1) * block_size; ++i) {
      const double u = rng.Uniform();
      if (grid.degenerate()) {
        out.codes[i] = 0;
        continue;
      }
      double x = rotated[i];
      if (x < grid.lo || x > grid.hi) {
        ++result.clamped;
        x = std::clamp(x, grid.lo, grid.hi);
      }
      // Position on the grid measured from lo in units of the step.
      const double t = (x - grid.lo) * levels_span / (grid.hi - grid.lo);
      const double floor_t = std::floor(t);
      int32_t k = static_cast<int32_t>(floor_t) + (u < t - floor_t ? 1 : 0);
      k = std::clamp<int32_t>(k, 0, 2 * top);
      out.codes[i] = static_cast<int8_t>(k - top);
    }
  }
  return result;
}

core::GradientVector ThcDequantize(std::span<const int32_t> code_sums,
                                   std::span<const QuantRange> shared_ranges,
                                   size_t block_size, unsigned q,
                                   size_t num_workers) {
  if (block_size == 0 || code_sums.size() != shared_ranges.size() * block_size) {
    throw InvalidArgument("code sums do not match the block layout");
  }
  std::vector<float> out(code_sums.size());
  const double n = static_cast<double>(num_workers);
  for (size_t p = 0; p < shared_ranges.size(); ++p) {
    const QuantGrid grid{shared_ranges[p].lo, shared_ranges[p].hi, q};
    const double base = n * grid.mid();
    const double step = grid.step();
    for (size_t i = p * block_size; i < (p + 1) * block_size; ++i) {
      out[i] = static_cast<float>(base + step * code_sums[i]);
    }
  }
  return core::GradientVector::FromPadded(std::move(out), code_sums.size(),
                                          /*allow_nonzero_tail=*/true);
}

ResidualBuffer::ResidualBuffer(size_t logical_len)
    : residual_(core::GradientVector::Zeros(logical_len)) {}

core::GradientVector ResidualBuffer::Apply(
    const core::GradientVector& g) const {
  if (g.logical_len() != residual_.logical_len()) {
    throw InvalidArgument("error-feedback length mismatch");
  }
  std::vector<float> out(g.padded_len());
  for (size_t i = 0; i < out.size(); ++i) out[i] = g[i] + residual_[i];
  return core::GradientVector::FromPadded(std::move(out), g.logical_len());
}

void ResidualBuffer::Update(const core::GradientVector& corrected,
                            const core::GradientVector& reconstructed_local) {
  if (corrected.logical_len() != residual_.logical_len() ||
      reconstructed_local.logical_len() != residual_.logical_len()) {
    throw InvalidArgument("error-feedback length mismatch");
  }
  std::vector<float> out(residual_.padded_len(), 0.0f);
  for (size_t i = 0; i < residual_.logical_len(); ++i) {
    out[i] = corrected[i] - reconstructed_local[i];
  }
  residual_ =
      core::GradientVector::FromPadded(std::move(out), residual_.logical_len());
}

}  // namespace gradcomp::compress
