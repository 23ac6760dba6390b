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

#ifndef GRADCOMP_COMPRESSORS_H_
#define GRADCOMP_COMPRESSORS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gradcomp/vectorcore.h"

namespace gradcomp::compress {

// ---------------------------------------------------------------------------
// Scheme configuration.

struct TopKConfig {
  size_t k = 1;
};
struct TopKCConfig {
  size_t chunk_size = 64;
  size_t num_chunks = 1;  // J
  // Ablation: shuffle coordinates with a shared permutation before chunking.
  bool permute = false;
};
struct ThcConfig {
  unsigned q = 4;        // quantization bits
  unsigned b = 4;        // aggregation bits per coordinate (b >= q)
  unsigned depth = 10;   // rotation depth l'; block size 2^depth
  // Grid cardinality 2^q - 1 (one q-bit code point stays unused).
  size_t levels() const { return (size_t{1} << q) - 1; }
};
struct PowerSgdConfig {
  size_t rank = 4;
  bool warm_start = true;
  // Tensors smaller than this are all-reduced uncompressed.
  size_t min_compress_size = 4096;
};
struct DenseConfig {
  unsigned precision = 16;  // 16 or 32
};

using CompressorConfig =
    std::variant<TopKConfig, TopKCConfig, ThcConfig, PowerSgdConfig,
                 DenseConfig>;

// Throws InvalidArgument when the configuration is invalid for dimension d.
void Validate(const CompressorConfig& config, size_t d);
std::string SchemeKind(const CompressorConfig& config);

// K such that 48K/d is closest to `bits` (at least 1, at most d).
size_t TopKForBits(double bits, size_t d);
// J such that 16(JC/d + 1/C) is closest to `bits` (at least 1).
size_t TopKCChunksForBits(double bits, size_t d, size_t chunk_size);

// ---------------------------------------------------------------------------
// Payloads.

struct SparsePayload {
  std::vector<uint32_t> indices;
  std::vector<uint16_t> values;  // FP16 bit patterns
  friend bool operator==(const SparsePayload&, const SparsePayload&) = default;
};

// Values of the selected chunks, J * C FP16 words in chunk-id order (a short
// trailing chunk is zero-padded to C).
struct ChunkSetPayload {
  uint32_t chunk_size = 0;
  std::vector<uint32_t> chunk_ids;
  std::vector<uint16_t> values;
  friend bool operator==(const ChunkSetPayload&,
                         const ChunkSetPayload&) = default;
};

struct QuantRange {
  float lo = 0.0f;
  float hi = 0.0f;
  friend bool operator==(const QuantRange&, const QuantRange&) = default;
};

struct QuantPayload {
  uint8_t q = 0;
  uint32_t block_size = 0;
  uint64_t rotation_id = 0;  // round whose shared signs rotated the input
  std::vector<int8_t> codes;
  std::vector<QuantRange> ranges;  // one per block
  friend bool operator==(const QuantPayload&, const QuantPayload&) = default;
};

struct LowRankPayload {
  uint32_t rows = 0;
  uint32_t cols = 0;
  uint32_t rank = 0;
  std::vector<float> p;  // rows x rank, row-major
  std::vector<float> q;  // cols x rank, row-major
  friend bool operator==(const LowRankPayload&,
                         const LowRankPayload&) = default;
};

struct DensePayload {
  uint8_t precision = 32;
  std::vector<float> values;  // FP16-representable when precision == 16
  friend bool operator==(const DensePayload&, const DensePayload&) = default;
};

using CompressedPayload = std::variant<SparsePayload, ChunkSetPayload,
                                       QuantPayload, LowRankPayload,
                                       DensePayload>;

// Bits a payload occupies as collective input:
//   Sparse    48 K            (32-bit index + FP16 value)
//   ChunkSet  16 J C          (phase-2 values; norms are ledgered separately)
//   Quant     q len + 64 blocks
//   LowRank   32 r (m + n)
//   Dense     16 d or 32 d
uint64_t PayloadBits(const CompressedPayload& payload);

// Little-endian binary layout, see payload_codec.cc.
std::vector<uint8_t> EncodePayload(const CompressedPayload& payload);
CompressedPayload DecodePayload(std::span<const uint8_t> bytes);

// ---------------------------------------------------------------------------
// TopK and TopKC.

// The K coordinates of largest magnitude, ties to the lower index. Returned
// in ascending index order.
std::vector<uint32_t> TopKSelect(std::span<const float> values, size_t k);

// The J chunk ids with the largest aggregated norm, ties to the lower id.
// Ascending order; a pure function of its inputs.
std::vector<uint32_t> TopKCSelectChunks(std::span<const float> norms,
                                        size_t j);

SparsePayload TopKCompress(const core::GradientVector& v, size_t k);
core::GradientVector SparseDecompress(const SparsePayload& payload,
                                      size_t logical_len);

ChunkSetPayload GatherChunks(const core::GradientVector& v,
                             const core::ChunkGeometry& geom,
                             std::span<const uint32_t> chunk_ids);
core::GradientVector ScatterChunks(const ChunkSetPayload& payload,
                                   size_t logical_len);

// ---------------------------------------------------------------------------
// Quantization on a shared per-block grid.

// Per-block grid: levels at mid + z * step for z in [-L, L], L = 2^(q-1)-1.
struct QuantGrid {
  double lo;
  double hi;
  unsigned q;

  int32_t max_code() const { return (int32_t{1} << (q - 1)) - 1; }
  double mid() const { return 0.5 * (lo + hi); }
  double step() const { return (hi - lo) / (2.0 * max_code()); }
  bool degenerate() const { return hi == lo; }
};

// Local (min, max) of each block of a rotated vector.
std::vector<QuantRange> BlockRanges(const core::GradientVector& rotated,
                                    size_t block_size);

struct QuantizeResult {
  QuantPayload payload;
  uint64_t clamped = 0;  // coordinates pulled into the agreed range
};

// Stochastic rounding to the two nearest grid levels, unbiased inside the
// range. Consumes exactly one uniform from `rng` per coordinate.
QuantizeResult ThcQuantize(const core::GradientVector& rotated,
                           size_t block_size,
                           std::span<const QuantRange> shared_ranges,
                           unsigned q, core::Rng& rng);

// Aggregate value per coordinate: n * mid + step * code_sum.
core::GradientVector ThcDequantize(std::span<const int32_t> code_sums,
                                   std::span<const QuantRange> shared_ranges,
                                   size_t block_size, unsigned q,
                                   size_t num_workers);

// ---------------------------------------------------------------------------
// Error feedback.

class ResidualBuffer {
 public:
  explicit ResidualBuffer(size_t logical_len);

  // g + residual.
  core::GradientVector Apply(const core::GradientVector& g) const;
  // residual = corrected - reconstructed_local.
  void Update(const core::GradientVector& corrected,
              const core::GradientVector& reconstructed_local);

  const core::GradientVector& residual() const { return residual_; }

 private:
  core::GradientVector residual_;
};

}  // namespace gradcomp::compress

#endif  // GRADCOMP_COMPRESSORS_H_
