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

#ifndef GRADCOMP_METRICS_H_
#define GRADCOMP_METRICS_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gradcomp/collectives.h"
#include "gradcomp/vectorcore.h"

namespace gradcomp::metrics {

using collectives::OverflowStats;

// ||estimate - reference||^2 / ||reference||^2 over logical coordinates.
// Throws NumericError for an all-zero reference.
double Nmse(const core::GradientVector& estimate,
            const core::GradientVector& reference);
double Nmse(std::span<const float> estimate, std::span<const float> reference);

// clip_events / total_adds. Requires total_adds > 0.
double OverflowRate(const OverflowStats& stats);

// Analytical per-round time: compute terms plus the busiest worker's egress
// over the link bandwidth.
struct TimeModel {
  double bandwidth_bits_per_s = 1e9;
  double compute_s_per_round = 0.0;
  // Extra compute per round keyed by scheme kind (see SchemeKind()).
  std::map<std::string, double> compression_compute_s;

  double CompressionSeconds(const std::string& scheme) const;
  void Validate() const;
};

double SimulatedRoundTime(const collectives::TrafficLedger& ledger,
                          const TimeModel& model, const std::string& scheme);

// Median wall-clock seconds of `fn` over `reps` calls. Used to calibrate
// TimeModel::compression_compute_s; results are machine-dependent.
double MeasureSeconds(const std::function<void()>& fn, int reps);

// Top-K coordinates of the exact (double-precision) sum of worker
// gradients, ties to the lower index, ascending order.
std::vector<uint32_t> GlobalTopKOracle(
    std::span<const core::GradientVector> grads, size_t k);

// Exact mean of worker gradients, accumulated in double.
core::GradientVector ExactMean(std::span<const core::GradientVector> grads);

}  // namespace gradcomp::metrics

#endif  // GRADCOMP_METRICS_H_
