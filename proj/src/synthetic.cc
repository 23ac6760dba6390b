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

#include "gradcomp/synthetic.h"

#include <cmath>

#include "gradcomp/error.h"

namespace gradcomp::trainbench {
namespace {

std::vector<double> SharedSignal(const SyntheticGradSpec& spec,
                                 const core::SeedSpec& seeds, uint64_t round) {
  core::Rng envelope(seeds, core::StreamTag::kEnvelope, round);
  core::Rng noise(seeds, core::StreamTag::kSharedNoise, round);
  core::Rng spikes(seeds, core::StreamTag::kSpikes, round);
  const double innovation = std::sqrt(1.0 - spec.rho * spec.rho);
  std::vector<double> s(spec.d);
  double e = envelope.Normal();
  for (size_t i = 0; i < spec.d; ++i) {
    if (i > 0) e = spec.rho * e + innovation * envelope.Normal();
    double v = e + spec.noise_sigma * noise.Normal();
    if (spikes.Uniform() < spec.spike_density) v *= spec.spike_scale;
    s[i] = v;
  }
  return s;
}

core::GradientVector WorkerVector(const SyntheticGradSpec& spec,
                                  const std::vector<double>& shared,
                                  const core::SeedSpec& seeds, uint32_t worker,
                                  uint64_t round) {
  core::Rng rng(seeds, core::StreamTag::kWorkerNoise, round, worker);
  std::vector<float> out(spec.d);
  for (size_t i = 0; i < spec.d; ++i) {
    const double xi = spec.divergence > 0.0 ? rng.Normal() : 0.0;
    out[i] = static_cast<float>(spec.scale * (shared[i] + spec.divergence * xi));
  }
  return core::GradientVector::Pad(out);
}

}  // namespace

void SyntheticGradSpec::Validate() const {
  if (d == 0) throw InvalidArgument("synthetic dimension must be positive");
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw InvalidArgument("locality correlation rho must lie in [0, 1)");
  }
  if (!(spike_density >= 0.0 && spike_density <= 1.0)) {
    throw InvalidArgument("spike density must lie in [0, 1]");
  }
  if (noise_sigma < 0.0 || divergence < 0.0 || !(scale > 0.0) ||
      !(spike_scale > 0.0)) {
    throw InvalidArgument("noise, divergence and scales must be non-negative");
  }
}

core::GradientVector GenCorrelatedGradient(const SyntheticGradSpec& spec,
                                           const core::SeedSpec& seeds,
                                           uint32_t worker, uint64_t round) {
  spec.Validate();
  return WorkerVector(spec, SharedSignal(spec, seeds, round), seeds, worker,
                      round);
}

std::vector<core::GradientVector> GenWorkerGradients(
    const SyntheticGradSpec& spec, const core::SeedSpec& seeds, size_t n,
    uint64_t round) {
  spec.Validate();
  const auto shared = SharedSignal(spec, seeds, round);
  std::vector<core::GradientVector> out;
  out.reserve(n);
  for (size_t w = 0; w < n; ++w) {
    out.push_back(
        WorkerVector(spec, shared, seeds, static_cast<uint32_t>(w), round));
  }
  return out;
}

}  // namespace gradcomp::trainbench
