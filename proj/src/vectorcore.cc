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

#include "gradcomp/vectorcore.h"

#include <bit>
#include <cmath>
#include <numbers>
#include <string>

#include "gradcomp/error.h"

namespace gradcomp::core {

size_t NextPow2(size_t n) { return n <= 1 ? 1 : std::bit_ceil(n); }

bool IsPow2(size_t n) { return std::has_single_bit(n); }

GradientVector GradientVector::Pad(std::span<const float> values) {
  if (values.empty()) {
    throw InvalidArgument("gradient vector must be non-empty");
  }
  std::vector<float> padded(NextPow2(values.size()), 0.0f);
  for (size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError("non-finite gradient coordinate at index " +
                         std::to_string(i));
    }
    padded[i] = values[i];
  }
  return GradientVector(std::move(padded), values.size());
}

GradientVector GradientVector::Zeros(size_t logical_len) {
  if (logical_len == 0) {
    throw InvalidArgument("gradient vector must be non-empty");
  }
  return GradientVector(std::vector<float>(NextPow2(logical_len), 0.0f),
                        logical_len);
}

GradientVector GradientVector::FromPadded(std::vector<float> padded,
                                          size_t logical_len,
                                          bool allow_nonzero_tail) {
  if (logical_len == 0 || !IsPow2(padded.size()) ||
      padded.size() < logical_len ||
      (!allow_nonzero_tail && padded.size() != NextPow2(logical_len))) {
    throw InvalidArgument("padded buffer of size " +
                          std::to_string(padded.size()) +
                          " does not fit logical length " +
                          std::to_string(logical_len));
  }
  for (size_t i = 0; i < padded.size(); ++i) {
    if (!std::isfinite(padded[i])) {
      throw NumericError("non-finite gradient coordinate at index " +
                         std::to_string(i));
    }
    if (!allow_nonzero_tail && i >= logical_len && padded[i] != 0.0f) {
      throw InvalidArgument("padding coordinate " + std::to_string(i) +
                            " is nonzero");
    }
  }
  return GradientVector(std::move(padded), logical_len);
}

double GradientVector::SquaredNorm() const {
  double acc = 0.0;
  for (float x : values_) acc += static_cast<double>(x) * x;
  return acc;
}

ChunkGeometry::ChunkGeometry(size_t chunk_size, size_t logical_len)
    : chunk_size(chunk_size), logical_len(logical_len) {
  if (chunk_size == 0) throw InvalidArgument("chunk size must be positive");
}

size_t ChunkGeometry::end(size_t p) const {
  size_t e = (p + 1) * chunk_size;
  return e < logical_len ? e : logical_len;
}

std::vector<float> ChunkSquaredNorms(const GradientVector& v,
                                     const ChunkGeometry& geom) {
  if (geom.logical_len != v.logical_len()) {
    throw InvalidArgument("chunk geometry does not match vector length");
  }
  std::vector<float> out(geom.num_chunks());
  for (size_t p = 0; p < out.size(); ++p) {
    double acc = 0.0;
    for (size_t i = geom.begin(p); i < geom.end(p); ++i) {
      acc += static_cast<double>(v[i]) * v[i];
    }
    out[p] = static_cast<float>(acc);
  }
  return out;
}

uint16_t FloatToHalfBits(float x) {
  const uint32_t bits = std::bit_cast<uint32_t>(x);
  const uint16_t sign = static_cast<uint16_t>((bits >> 16) & 0x8000u);
  const uint32_t mag = bits & 0x7fffffffu;

  if (mag > 0x7f800000u) return sign | 0x7e00u;  // NaN stays NaN
  // 65520 is the midpoint between 65504 and 2^16; at or above it RNE would
  // produce infinity.
  if (mag >= 0x477ff000u) return sign | 0x7bffu;
  if (mag < 0x38800000u) {
    // Subnormal half: multiples of 2^-24. Scaling by 2^24 is exact and
    // nearbyint rounds to nearest-even in the default mode.
    const float scaled = std::bit_cast<float>(mag) * 16777216.0f;
    return sign | static_cast<uint16_t>(std::nearbyint(scaled));
  }
  const uint32_t exponent = (mag >> 23) - 127 + 15;
  const uint32_t mantissa = mag & 0x7fffffu;
  uint32_t h = (exponent << 10) | (mantissa >> 13);
  const uint32_t rest = mantissa & 0x1fffu;
  if (rest > 0x1000u || (rest == 0x1000u && (h & 1u))) ++h;
  return sign | static_cast<uint16_t>(h);
}

float HalfBitsToFloat(uint16_t h) {
  const uint32_t sign = static_cast<uint32_t>(h & 0x8000u) << 16;
  const uint32_t exponent = (h >> 10) & 0x1fu;
  const uint32_t mantissa = h & 0x3ffu;
  if (exponent == 0) {
    const float mag = static_cast<float>(mantissa) * (1.0f / 16777216.0f);
    return sign ? -mag : mag;
  }
  if (exponent == 0x1f) {
    return std::bit_cast<float>(sign | 0x7f800000u | (mantissa << 13));
  }
  return std::bit_cast<float>(sign | ((exponent - 15 + 127) << 23) |
                              (mantissa << 13));
}

uint64_t Mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

uint64_t SeedSpec::Derive(StreamTag tag, uint64_t round,
                          std::optional<uint32_t> worker) const {
  uint64_t h = Mix64(experiment_seed);
  h = Mix64(h ^ static_cast<uint64_t>(tag));
  h = Mix64(h ^ round);
  h = Mix64(h ^ (worker ? static_cast<uint64_t>(*worker) + 1 : 0));
  return h;
}

double Rng::Uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

uint64_t Rng::UniformBelow(uint64_t n) {
  if (n <= 1) return 0;
  const uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::Normal() {
  // 1 - U keeps the log argument in (0, 1].
  const double u1 = 1.0 - Uniform();
  const double u2 = Uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace gradcomp::core
