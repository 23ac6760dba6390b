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

#ifndef GRADCOMP_VECTORCORE_H_
#define GRADCOMP_VECTORCORE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace gradcomp::core {

// Smallest power of two >= n (n >= 1).
size_t NextPow2(size_t n);
bool IsPow2(size_t n);

// Dense FP32 gradient of logical length d, stored zero-padded to the next
// power of two. Coordinates are always finite.
class GradientVector {
 public:
  GradientVector() = default;

  // Pads `values` with zeros up to the next power of two. Throws
  // NumericError naming the first non-finite coordinate.
  static GradientVector Pad(std::span<const float> values);
  static GradientVector Zeros(size_t logical_len);
  // Adopts a buffer that is already padded. `padded.size()` must be a power
  // of two >= logical_len. Coordinates past logical_len must be zero unless
  // `allow_nonzero_tail` (rotated-domain vectors use the whole buffer).
  static GradientVector FromPadded(std::vector<float> padded,
                                   size_t logical_len,
                                   bool allow_nonzero_tail = false);

  size_t logical_len() const { return logical_len_; }
  size_t padded_len() const { return values_.size(); }

  std::span<const float> values() const { return values_; }
  std::span<const float> logical() const {
    return std::span<const float>(values_).first(logical_len_);
  }
  float operator[](size_t i) const { return values_[i]; }

  // Copies the first logical_len coordinates out.
  std::vector<float> ToVector() const {
    return std::vector<float>(values_.begin(), values_.begin() + logical_len_);
  }

  double SquaredNorm() const;

  friend bool operator==(const GradientVector&, const GradientVector&) =
      default;

 private:
  GradientVector(std::vector<float> values, size_t logical_len)
      : values_(std::move(values)), logical_len_(logical_len) {}

  std::vector<float> values_;
  size_t logical_len_ = 0;
};

// Partition of a length-d vector into ceil(d / C) chunks of size C. The last
// chunk may be logically short; the missing coordinates read as zero.
struct ChunkGeometry {
  size_t chunk_size = 1;
  size_t logical_len = 0;

  ChunkGeometry() = default;
  ChunkGeometry(size_t chunk_size, size_t logical_len);

  size_t num_chunks() const {
    return (logical_len + chunk_size - 1) / chunk_size;
  }
  size_t begin(size_t p) const { return p * chunk_size; }
  // End of chunk p, clipped to logical_len.
  size_t end(size_t p) const;
};

// Squared L2 norm of every chunk, accumulated in double.
std::vector<float> ChunkSquaredNorms(const GradientVector& v,
                                     const ChunkGeometry& geom);

// IEEE binary16 codec. Rounds to nearest, ties to even; magnitudes that would
// round past the largest finite half saturate to +-65504.
uint16_t FloatToHalfBits(float x);
float HalfBitsToFloat(uint16_t h);
inline float Fp16RoundTrip(float x) { return HalfBitsToFloat(FloatToHalfBits(x)); }

inline constexpr float kHalfMax = 65504.0f;

// Purpose tags for derived random streams.
enum class StreamTag : uint64_t {
  kSigns = 1,
  kPermutation = 2,
  kQuantRounding = 3,
  kPowerSgdInit = 4,
  kEnvelope = 5,
  kSharedNoise = 6,
  kWorkerNoise = 7,
  kBatch = 8,
  kDataset = 9,
  kModelInit = 10,
  kSpikes = 11,
  kTrial = 12,
};

// SplitMix64 finalizer.
uint64_t Mix64(uint64_t z);

// Stream seed derivation:
//   h = Mix64(experiment_seed)
//   h = Mix64(h ^ tag)
//   h = Mix64(h ^ round)
//   h = Mix64(h ^ (worker ? worker + 1 : 0))
// Streams without a worker component are identical on every worker.
struct SeedSpec {
  uint64_t experiment_seed = 0;

  uint64_t Derive(StreamTag tag, uint64_t round,
                  std::optional<uint32_t> worker = std::nullopt) const;
};

// Deterministic random stream: mt19937_64 seeded with a derived seed, with
// explicitly specified conversions so other implementations can replicate it.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}
  Rng(const SeedSpec& spec, StreamTag tag, uint64_t round,
      std::optional<uint32_t> worker = std::nullopt)
      : engine_(spec.Derive(tag, round, worker)) {}

  uint64_t NextU64() { return engine_(); }
  // (next >> 11) * 2^-53, in [0, 1).
  double Uniform();
  // Uniform integer in [0, n) by rejection on the top of the 64-bit range.
  uint64_t UniformBelow(uint64_t n);
  // Box-Muller using two uniforms; one normal per call.
  double Normal();
  // +1 or -1 from the low bit of the next word.
  int Sign() { return (NextU64() & 1u) ? -1 : 1; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gradcomp::core

#endif  // GRADCOMP_VECTORCORE_H_
