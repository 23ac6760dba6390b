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

#include "gradcomp/metrics.h"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "gradcomp/compressors.h"
#include "gradcomp/error.h"

namespace gradcomp::metrics {

double Nmse(std::span<const float> estimate, std::span<const float> reference) {
  if (estimate.size() != reference.size()) {
    throw InvalidArgument("NMSE operands differ in length");
  }
  double err = 0.0;
  double ref = 0.0;
  for (size_t i = 0; i < reference.size(); ++i) {
    const double diff = static_cast<double>(estimate[i]) - reference[i];
    err += diff * diff;
    ref += static_cast<double>(reference[i]) * reference[i];
  }
  if (ref == 0.0) throw NumericError("NMSE undefined for a zero reference");
  return err / ref;
}

double Nmse(const core::GradientVector& estimate,
            const core::GradientVector& reference) {
  if (estimate.logical_len() != reference.logical_len()) {
    throw InvalidArgument("NMSE operands differ in logical length");
  }
  return Nmse(estimate.logical(), reference.logical());
}

double OverflowRate(const OverflowStats& stats) {
  if (stats.total_adds == 0) {
    throw InvalidArgument("overflow rate needs at least one addition");
  }
  return static_cast<double>(stats.clip_events) /
         static_cast<double>(stats.total_adds);
}

double TimeModel::CompressionSeconds(const std::string& scheme) const {
  auto it = compression_compute_s.find(scheme);
  return it == compression_compute_s.end() ? 0.0 : it->second;
}

void TimeModel::Validate() const {
  if (!(bandwidth_bits_per_s > 0.0)) {
    throw InvalidArgument("bandwidth must be positive");
  }
  if (compute_s_per_round < 0.0) {
    throw InvalidArgument("compute time must be non-negative");
  }
  for (const auto& [name, s] : compression_compute_s) {
    if (s < 0.0) {
      throw InvalidArgument("compression compute time for " + name +
                            " must be non-negative");
    }
  }
}

double SimulatedRoundTime(const collectives::TrafficLedger& ledger,
                          const TimeModel& model, const std::string& scheme) {
  return model.compute_s_per_round + model.CompressionSeconds(scheme) +
         static_cast<double>(ledger.MaxWorkerEgress()) /
             model.bandwidth_bits_per_s;
}

double MeasureSeconds(const std::function<void()>& fn, int reps) {
  std::vector<double> samples;
  for (int i = 0; i < std::max(reps, 1); ++i) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    const auto stop = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double>(stop - start).count());
  }
  std::sort(samples.begin(), samples.end());
  return samples[samples.size() / 2];
}

core::GradientVector ExactMean(std::span<const core::GradientVector> grads) {
  if (grads.empty()) throw InvalidArgument("no worker gradients");
  const size_t d = grads[0].logical_len();
  std::vector<double> acc(d, 0.0);
  for (const auto& g : grads) {
    if (g.logical_len() != d) throw InvalidArgument("gradient length mismatch");
    for (size_t i = 0; i < d; ++i) acc[i] += g[i];
  }
  std::vector<float> mean(d);
  for (size_t i = 0; i < d; ++i) {
    mean[i] = static_cast<float>(acc[i] / static_cast<double>(grads.size()));
  }
  return core::GradientVector::Pad(mean);
}

std::vector<uint32_t> GlobalTopKOracle(
    std::span<const core::GradientVector> grads, size_t k) {
  if (grads.empty()) throw InvalidArgument("no worker gradients");
  const size_t d = grads[0].logical_len();
  std::vector<double> sum(d, 0.0);
  for (const auto& g : grads) {
    if (g.logical_len() != d) throw InvalidArgument("gradient length mismatch");
    for (size_t i = 0; i < d; ++i) sum[i] += g[i];
  }
  if (k < 1 || k > d) throw InvalidArgument("Global TopK needs 1 <= K <= d");
  std::vector<uint32_t> order(d);
  for (uint32_t i = 0; i < d; ++i) order[i] = i;
  auto before = [&](uint32_t a, uint32_t b) {
    const double ma = std::fabs(sum[a]);
    const double mb = std::fabs(sum[b]);
    return ma != mb ? ma > mb : a < b;
  };
  std::nth_element(order.begin(), order.begin() + (k - 1), order.end(), before);
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace gradcomp::metrics
