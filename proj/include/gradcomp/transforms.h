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

#ifndef GRADCOMP_TRANSFORMS_H_
#define GRADCOMP_TRANSFORMS_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gradcomp/vectorcore.h"

namespace gradcomp::transforms {

// A (partial) randomized Hadamard transform over a power-of-two buffer:
// random +-1 diagonal followed by depth_used butterfly stages, which rotates
// every consecutive block of 2^depth_used coordinates independently.
class RotationSpec {
 public:
  // Draws the sign diagonal from the shared (worker-independent) stream for
  // `round`, so every worker derives the same rotation.
  static RotationSpec Draw(size_t padded_len, unsigned depth_used,
                           const core::SeedSpec& seeds, uint64_t round);
  static RotationSpec FromSigns(std::vector<int8_t> signs,
                                unsigned depth_used);

  size_t padded_len() const { return signs_.size(); }
  unsigned depth_full() const;
  unsigned depth_used() const { return depth_used_; }
  size_t block_size() const { return size_t{1} << depth_used_; }
  const std::vector<int8_t>& signs() const { return signs_; }

 private:
  RotationSpec(std::vector<int8_t> signs, unsigned depth_used);

  std::vector<int8_t> signs_;
  unsigned depth_used_ = 0;
};

// blockdiag(H) * D * v with orthonormal scaling 2^(-l'/2). The result is a
// rotated-domain vector: logical_len == padded_len.
core::GradientVector RhtForward(const core::GradientVector& v,
                                const RotationSpec& spec);

// D * blockdiag(H) * v, the transpose of RhtForward. Returns the full padded
// buffer; callers truncate back to their logical length with Truncate().
core::GradientVector RhtInverse(const core::GradientVector& v,
                                const RotationSpec& spec);

// Keeps the first logical_len coordinates and zeroes the padding.
core::GradientVector Truncate(const core::GradientVector& v,
                              size_t logical_len);

// Uniform permutation of [0, n) from a Fisher-Yates shuffle.
class Permutation {
 public:
  static Permutation Draw(size_t n, const core::SeedSpec& seeds,
                          uint64_t round);
  static Permutation Identity(size_t n);

  size_t size() const { return source_.size(); }
  // Output coordinate k takes input coordinate source()[k].
  const std::vector<uint32_t>& source() const { return source_; }

 private:
  explicit Permutation(std::vector<uint32_t> source)
      : source_(std::move(source)) {}
  std::vector<uint32_t> source_;
};

// Permutes the logical coordinates of v (padding stays in place).
core::GradientVector Permute(const core::GradientVector& v,
                             const Permutation& perm);
core::GradientVector InversePermute(const core::GradientVector& v,
                                    const Permutation& perm);

}  // namespace gradcomp::transforms

#endif  // GRADCOMP_TRANSFORMS_H_
