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

#include "gradcomp/trainbench.h"

#include <algorithm>
#include <cmath>

#include "gradcomp/csv.h"
#include "gradcomp/error.h"
#include "gradcomp/pipelines.h"

namespace gradcomp::trainbench {
namespace {

bool AllFinite(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(),
                     [](float x) { return std::isfinite(x); });
}

// One data-parallel SGD run; evaluation and stopping are left to the caller.
class Runner {
 public:
  Runner(const Model& model, const Dataset& train, const SchemeRun& scheme,
         const TrainOptions& options)
      : model_(model),
        train_(train),
        options_(options),
        seeds_{options.seed},
        aggregator_(scheme.config, options.workers, model.num_params(),
                    seeds_, options.error_feedback,
                    pipelines::TensorLayout{model.tensor_sizes()}),
        params_(model.Init(seeds_)),
        velocity_(params_.size(), 0.0f) {}

  // Runs one round; returns false on divergence.
  bool Step(uint64_t round, collectives::TrafficLedger* ledger) {
    const size_t n = options_.workers;
    const size_t per = options_.batch_per_worker;
    core::Rng rng(seeds_, core::StreamTag::kBatch, round);
    std::vector<uint32_t> batch(n * per);
    for (uint32_t& idx : batch) {
      idx = static_cast<uint32_t>(rng.UniformBelow(train_.size()));
    }
    std::vector<core::GradientVector> grads;
    grads.reserve(n);
    std::vector<float> g(params_.size());
    for (size_t w = 0; w < n; ++w) {
      const double loss = model_.LossAndGradient(
          params_, train_, std::span<const uint32_t>(batch).subspan(w * per, per),
          g);
      if (!std::isfinite(loss) || !AllFinite(g)) return false;
      grads.push_back(core::GradientVector::Pad(g));
    }
    pipelines::RoundResult result;
    try {
      result = aggregator_.Aggregate(grads, round);
    } catch (const NumericError&) {
      return false;
    }
    const auto mean = result.estimate.logical();
    const float mu = static_cast<float>(options_.momentum);
    const float lr = static_cast<float>(options_.lr);
    for (size_t i = 0; i < params_.size(); ++i) {
      velocity_[i] = mu * velocity_[i] + mean[i];
      params_[i] -= lr * velocity_[i];
    }
    if (ledger != nullptr) *ledger = std::move(result.ledger);
    return AllFinite(params_);
  }

  const std::vector<float>& params() const { return params_; }
  std::string kind() const { return aggregator_.kind(); }

 private:
  const Model& model_;
  const Dataset& train_;
  const TrainOptions& options_;
  core::SeedSpec seeds_;
  pipelines::Aggregator aggregator_;
  std::vector<float> params_;
  std::vector<float> velocity_;
};

}  // namespace

std::vector<double> RollingAverage(std::span<const double> series,
                                   size_t window) {
  if (window == 0) throw InvalidArgument("rolling window must be at least 1");
  std::vector<double> out(series.size());
  double sum = 0.0;
  for (size_t i = 0; i < series.size(); ++i) {
    sum += series[i];
    if (i >= window) sum -= series[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

void EarlyStopRule::Validate() const {
  if (patience == 0) throw InvalidArgument("early-stop patience must be >= 1");
  if (!(min_delta >= 0.0)) throw InvalidArgument("min_delta must be >= 0");
}

bool EarlyStopper::Update(double val_loss) {
  if (!have_best_ || val_loss < best_ - rule_.min_delta) {
    best_ = val_loss;
    have_best_ = true;
    stale_ = 0;
    return false;
  }
  return ++stale_ >= rule_.patience;
}

std::optional<double> TtaCurve::TimeTo(double threshold) const {
  for (const TtaPoint& p : points) {
    if (p.smoothed_metric >= threshold) return p.sim_seconds;
  }
  return std::nullopt;
}

double TtaCurve::final_metric() const {
  return points.empty() ? 0.0 : points.back().smoothed_metric;
}

void TrainOptions::Validate() const {
  if (workers == 0) throw InvalidArgument("workers must be positive");
  if (batch_per_worker == 0) throw InvalidArgument("batch size must be positive");
  if (!(lr > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw InvalidArgument("momentum must lie in [0, 1)");
  }
  if (max_rounds == 0 || eval_interval == 0 || smoothing_window == 0) {
    throw InvalidArgument("rounds, eval interval and window must be positive");
  }
  if (early_stop) early_stop->Validate();
}

TtaCurve Train(const Model& model, const Dataset& train, const Dataset& val,
               const SchemeRun& scheme, const TrainOptions& options,
               const metrics::TimeModel& time_model) {
  options.Validate();
  time_model.Validate();
  Runner runner(model, train, scheme, options);
  TtaCurve curve;
  curve.scheme = scheme.name;
  std::optional<EarlyStopper> stopper;
  if (options.early_stop) stopper.emplace(*options.early_stop);

  std::vector<double> raw;
  double clock = 0.0;
  uint64_t done = 0;
  for (uint64_t round = 0; round < options.max_rounds; ++round) {
    collectives::TrafficLedger ledger;
    if (!runner.Step(round, &ledger)) {
      curve.diverged = true;
      break;
    }
    clock += metrics::SimulatedRoundTime(ledger, time_model, runner.kind());
    done = round + 1;
    if (done % options.eval_interval != 0 && done != options.max_rounds) {
      continue;
    }
    const Evaluation e = model.Evaluate(runner.params(), val);
    if (!std::isfinite(e.loss)) {
      curve.diverged = true;
      break;
    }
    raw.push_back(e.accuracy);
    const auto smoothed = RollingAverage(raw, options.smoothing_window);
    curve.points.push_back(
        TtaPoint{done, clock, e.accuracy, smoothed.back(), e.loss});
    if (stopper && stopper->Update(e.loss)) {
      curve.stopped_early = true;
      break;
    }
  }
  curve.mean_round_seconds = done == 0 ? 0.0 : clock / static_cast<double>(done);
  return curve;
}

std::vector<float> TrainParameters(const Model& model, const Dataset& train,
                                   const SchemeRun& scheme,
                                   const TrainOptions& options, size_t rounds) {
  options.Validate();
  Runner runner(model, train, scheme, options);
  for (uint64_t round = 0; round < rounds; ++round) {
    if (!runner.Step(round, nullptr)) {
      throw NumericError("training diverged at round " + std::to_string(round));
    }
  }
  return runner.params();
}

void WriteCurveCsvHeader(std::ostream& out) {
  out << "scheme,round,sim_seconds,raw_metric,smoothed_metric\n";
}

void WriteCurveCsvRows(std::ostream& out, const TtaCurve& curve) {
  for (const TtaPoint& p : curve.points) {
    out << curve.scheme << ',' << p.round << ',' << FormatDouble(p.sim_seconds)
        << ',' << FormatDouble(p.raw_metric) << ','
        << FormatDouble(p.smoothed_metric) << '\n';
  }
}

double MagnitudeAutocorrelation(std::span<const float> v) {
  if (v.size() < 2) throw InvalidArgument("need at least two coordinates");
  double mean = 0.0;
  for (float x : v) mean += std::fabs(x);
  mean /= static_cast<double>(v.size());
  double num = 0.0;
  double den = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    const double a = std::fabs(v[i]) - mean;
    den += a * a;
    if (i + 1 < v.size()) num += a * (std::fabs(v[i + 1]) - mean);
  }
  return den == 0.0 ? 0.0 : num / den;
}

}  // namespace gradcomp::trainbench
