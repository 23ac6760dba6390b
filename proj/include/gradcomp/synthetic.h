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

#ifndef GRADCOMP_SYNTHETIC_H_
#define GRADCOMP_SYNTHETIC_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gradcomp/vectorcore.h"

namespace gradcomp::trainbench {

// Spatially correlated synthetic gradients.
//
//   e_0 ~ N(0,1),  e_i = rho e_(i-1) + sqrt(1 - rho^2) z_i      (shared)
//   s_i = (e_i + noise_sigma eta_i) * (spike_i ? spike_scale : 1)  (shared)
//   g_i^(w) = scale * (s_i + divergence xi_i^(w))
//
// The envelope, noise and spikes come from worker-independent streams for the
// round; xi from the worker's own stream.
struct SyntheticGradSpec {
  size_t d = 1 << 16;
  double rho = 0.99;
  double spike_density = 0.001;
  double spike_scale = 4.0;
  double noise_sigma = 0.05;
  double divergence = 0.1;
  double scale = 1.0;

  void Validate() const;
};

core::GradientVector GenCorrelatedGradient(const SyntheticGradSpec& spec,
                                           const core::SeedSpec& seeds,
                                           uint32_t worker, uint64_t round);

// Same vectors as calling GenCorrelatedGradient for workers 0..n-1, with the
// shared part generated once.
std::vector<core::GradientVector> GenWorkerGradients(
    const SyntheticGradSpec& spec, const core::SeedSpec& seeds, size_t n,
    uint64_t round);

}  // namespace gradcomp::trainbench

#endif  // GRADCOMP_SYNTHETIC_H_
