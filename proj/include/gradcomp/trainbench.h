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

#ifndef GRADCOMP_TRAINBENCH_H_
#define GRADCOMP_TRAINBENCH_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gradcomp/compressors.h"
#include "gradcomp/metrics.h"
#include "gradcomp/models.h"
#include "gradcomp/synthetic.h"

namespace gradcomp::trainbench {

// Trailing mean over the last `window` entries, truncated at the start.
std::vector<double> RollingAverage(std::span<const double> series,
                                   size_t window);

// Stop after `patience` evaluations without a validation-loss improvement
// larger than min_delta.
struct EarlyStopRule {
  size_t patience = 20;
  double min_delta = 1e-4;

  void Validate() const;
};

class EarlyStopper {
 public:
  explicit EarlyStopper(EarlyStopRule rule) : rule_(rule) {}
  // Feeds one validation loss; returns true once training should stop.
  bool Update(double val_loss);

 private:
  EarlyStopRule rule_;
  double best_ = 0.0;
  bool have_best_ = false;
  size_t stale_ = 0;
};

struct TtaPoint {
  uint64_t round = 0;     // 1-based count of completed rounds
  double sim_seconds = 0.0;
  double raw_metric = 0.0;  // validation accuracy
  double smoothed_metric = 0.0;
  double val_loss = 0.0;
};

struct TtaCurve {
  std::string scheme;
  std::vector<TtaPoint> points;
  bool diverged = false;
  bool stopped_early = false;
  // Mean simulated seconds per round.
  double mean_round_seconds = 0.0;

  // Simulated time at which the smoothed metric first reaches `threshold`.
  std::optional<double> TimeTo(double threshold) const;
  double final_metric() const;
};

struct TrainOptions {
  size_t workers = 4;
  size_t batch_per_worker = 32;
  double lr = 0.1;
  double momentum = 0.0;
  size_t max_rounds = 300;
  size_t eval_interval = 1;
  std::optional<EarlyStopRule> early_stop = EarlyStopRule{};
  size_t smoothing_window = 5;
  bool error_feedback = true;
  uint64_t seed = 1;

  void Validate() const;
};

struct SchemeRun {
  std::string name;
  compress::CompressorConfig config;
};

// Synchronous data-parallel SGD. Each round the shared batch stream draws
// workers * batch_per_worker sample indices (with replacement); worker w
// takes the w-th slice. Worker gradients are aggregated by the scheme, the
// mean is applied with SGD (+ momentum), and the model is evaluated on
// `val` every eval_interval rounds. A non-finite loss or gradient ends the
// run with `diverged` set.
TtaCurve Train(const Model& model, const Dataset& train, const Dataset& val,
               const SchemeRun& scheme, const TrainOptions& options,
               const metrics::TimeModel& time_model);

// Parameters after `rounds` rounds of the same loop with no evaluation or
// stopping. Used for trajectory comparisons.
std::vector<float> TrainParameters(const Model& model, const Dataset& train,
                                   const SchemeRun& scheme,
                                   const TrainOptions& options, size_t rounds);

// Columns: scheme,round,sim_seconds,raw_metric,smoothed_metric.
void WriteCurveCsvHeader(std::ostream& out);
void WriteCurveCsvRows(std::ostream& out, const TtaCurve& curve);

// Lag-1 sample autocorrelation of |v_i|.
double MagnitudeAutocorrelation(std::span<const float> v);

}  // namespace gradcomp::trainbench

#endif  // GRADCOMP_TRAINBENCH_H_
