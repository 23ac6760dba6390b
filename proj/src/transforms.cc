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

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "gradcomp/error.h"

namespace gradcomp::transforms {
namespace {

double OrthonormalScale(unsigned depth) {
  double scale = std::ldexp(1.0, -static_cast<int>(depth / 2));
  if (depth % 2 == 1) scale *= std::numbers::sqrt2 / 2.0;
  return scale;
}

// In-place unnormalized Walsh-Hadamard butterflies, first `depth` stages.
void Butterflies(std::vector<double>& x, unsigned depth) {
  const size_t n = x.size();
  for (unsigned stage = 0; stage < depth; ++stage) {
    const size_t h = size_t{1} << stage;
    for (size_t i = 0; i < n; i += 2 * h) {
      for (size_t j = i; j < i + h; ++j) {
        const double a = x[j];
        const double b = x[j + h];
        x[j] = a + b;
        x[j + h] = a - b;
      }
    }
  }
}

void CheckSize(const core::GradientVector& v, const RotationSpec& spec) {
  if (v.padded_len() != spec.padded_len()) {
    throw InvalidArgument("rotation spec covers " +
                          std::to_string(spec.padded_len()) +
                          " coordinates but vector has " +
                          std::to_string(v.padded_len()));
  }
}

}  // namespace

RotationSpec::RotationSpec(std::vector<int8_t> signs, unsigned depth_used)
    : signs_(std::move(signs)), depth_used_(depth_used) {
  if (signs_.empty() || !core::IsPow2(signs_.size())) {
    throw InvalidArgument("rotation length must be a power of two");
  }
  if (depth_used_ > depth_full()) {
    throw InvalidArgument("rotation depth " + std::to_string(depth_used_) +
                          " exceeds log2(length) = " +
                          std::to_string(depth_full()));
  }
  for (int8_t s : signs_) {
    if (s != 1 && s != -1) throw InvalidArgument("sign entries must be +-1");
  }
}

RotationSpec RotationSpec::Draw(size_t padded_len, unsigned depth_used,
                                const core::SeedSpec& seeds, uint64_t round) {
  core::Rng rng(seeds, core::StreamTag::kSigns, round);
  std::vector<int8_t> signs(padded_len);
  for (auto& s : signs) s = static_cast<int8_t>(rng.Sign());
  return RotationSpec(std::move(signs), depth_used);
}

RotationSpec RotationSpec::FromSigns(std::vector<int8_t> signs,
                                     unsigned depth_used) {
  return RotationSpec(std::move(signs), depth_used);
}

unsigned RotationSpec::depth_full() const {
  return static_cast<unsigned>(std::countr_zero(signs_.size()));
}

core::GradientVector RhtForward(const core::GradientVector& v,
                                const RotationSpec& spec) {
  CheckSize(v, spec);
  std::vector<double> work(v.padded_len());
  for (size_t i = 0; i < work.size(); ++i) {
    work[i] = spec.signs()[i] * static_cast<double>(v[i]);
  }
  Butterflies(work, spec.depth_used());
  const double scale = OrthonormalScale(spec.depth_used());
  std::vector<float> out(work.size());
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(work[i] * scale);
  }
  return core::GradientVector::FromPadded(std::move(out), v.padded_len(),
                                          /*allow_nonzero_tail=*/true);
}

core::GradientVector RhtInverse(const core::GradientVector& v,
                                const RotationSpec& spec) {
  CheckSize(v, spec);
  std::vector<double> work(v.values().begin(), v.values().end());
  Butterflies(work, spec.depth_used());
  const double scale = OrthonormalScale(spec.depth_used());
  std::vector<float> out(work.size());
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(spec.signs()[i] * work[i] * scale);
  }
  return core::GradientVector::FromPadded(std::move(out), v.padded_len(),
                                          /*allow_nonzero_tail=*/true);
}

core::GradientVector Truncate(const core::GradientVector& v,
                              size_t logical_len) {
  if (logical_len == 0 || logical_len > v.padded_len()) {
    throw InvalidArgument("cannot truncate to length " +
                          std::to_string(logical_len));
  }
  std::vector<float> out(core::NextPow2(logical_len), 0.0f);
  std::copy_n(v.values().begin(), logical_len, out.begin());
  return core::GradientVector::FromPadded(std::move(out), logical_len);
}

Permutation Permutation::Draw(size_t n, const core::SeedSpec& seeds,
                              uint64_t round) {
  std::vector<uint32_t> source(n);
  std::iota(source.begin(), source.end(), 0u);
  core::Rng rng(seeds, core::StreamTag::kPermutation, round);
  for (size_t i = n; i-- > 1;) {
    std::swap(source[i], source[rng.UniformBelow(i + 1)]);
  }
  return Permutation(std::move(source));
}

Permutation Permutation::Identity(size_t n) {
  std::vector<uint32_t> source(n);
  std::iota(source.begin(), source.end(), 0u);
  return Permutation(std::move(source));
}

core::GradientVector Permute(const core::GradientVector& v,
                             const Permutation& perm) {
  if (perm.size() != v.logical_len()) {
    throw InvalidArgument("permutation length does not match vector");
  }
  std::vector<float> out(v.values().begin(), v.values().end());
  for (size_t k = 0; k < perm.size(); ++k) out[k] = v[perm.source()[k]];
  return core::GradientVector::FromPadded(std::move(out), v.logical_len());
}

core::GradientVector InversePermute(const core::GradientVector& v,
                                    const Permutation& perm) {
  if (perm.size() != v.logical_len()) {
    throw InvalidArgument("permutation length does not match vector");
  }
  std::vector<float> out(v.values().begin(), v.values().end());
  for (size_t k = 0; k < perm.size(); ++k) out[perm.source()[k]] = v[k];
  return core::GradientVector::FromPadded(std::move(out), v.logical_len());
}

}  // namespace gradcomp::transforms
