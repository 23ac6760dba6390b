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

#include "gradcomp/models.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "gradcomp/error.h"

namespace gradcomp::trainbench {
namespace {

double Softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    out.push_back(first == std::string::npos
                      ? std::string()
                      : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

size_t Model::num_params() const {
  const auto sizes = tensor_sizes();
  return std::accumulate(sizes.begin(), sizes.end(), size_t{0});
}

Dataset MakeGaussianClusters(size_t samples, size_t features, size_t classes,
                             double separation, const core::SeedSpec& seeds,
                             uint64_t stream_round) {
  if (samples == 0 || features == 0 || classes < 2) {
    throw InvalidArgument("cluster dataset needs samples, features and >= 2 classes");
  }
  core::Rng rng(seeds, core::StreamTag::kDataset, stream_round);
  std::vector<double> centers(classes * features);
  for (double& c : centers) c = separation * rng.Normal();
  Dataset data;
  data.features = features;
  data.classes = classes;
  data.x.resize(samples * features);
  data.y.resize(samples);
  for (size_t i = 0; i < samples; ++i) {
    const size_t label = rng.UniformBelow(classes);
    data.y[i] = static_cast<int32_t>(label);
    for (size_t f = 0; f < features; ++f) {
      data.x[i * features + f] =
          static_cast<float>(centers[label * features + f] + rng.Normal());
    }
  }
  return data;
}

Dataset LoadCsvDataset(const std::string& path,
                       const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset file is empty");
  const auto header = SplitCsvLine(line);
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) {
    throw ConfigError("dataset has no column named '" + label_column + "'");
  }
  const size_t label_index = label_it - header.begin();

  std::vector<std::string> labels;
  std::vector<float> x;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = SplitCsvLine(line);
    if (cells.size() != header.size()) {
      throw ConfigError("dataset line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " fields, expected " +
                        std::to_string(header.size()));
    }
    for (size_t c = 0; c < cells.size(); ++c) {
      if (c == label_index) {
        labels.push_back(cells[c]);
        continue;
      }
      float v = 0.0f;
      const auto* begin = cells[c].data();
      const auto* end = begin + cells[c].size();
      const auto [ptr, ec] = std::from_chars(begin, end, v);
      if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw ConfigError("dataset line " + std::to_string(line_no) +
                          ", column '" + header[c] + "' is not a finite number");
      }
      x.push_back(v);
    }
  }
  if (labels.empty()) throw ConfigError("dataset has no rows");

  std::vector<std::string> distinct = labels;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) throw ConfigError("dataset needs at least two classes");
  std::map<std::string, int32_t> ids;
  for (size_t i = 0; i < distinct.size(); ++i) {
    ids[distinct[i]] = static_cast<int32_t>(i);
  }
  Dataset data;
  data.features = header.size() - 1;
  data.classes = distinct.size();
  data.x = std::move(x);
  for (const auto& l : labels) data.y.push_back(ids[l]);
  return data;
}

std::pair<Dataset, Dataset> SplitDataset(const Dataset& data,
                                         double val_fraction) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw InvalidArgument("validation fraction must lie in (0, 1)");
  }
  const size_t val = std::max<size_t>(
      1, static_cast<size_t>(std::round(val_fraction * data.size())));
  if (val >= data.size()) throw InvalidArgument("dataset too small to split");
  const size_t train = data.size() - val;
  Dataset a{data.features, data.classes, {}, {}};
  Dataset b = a;
  a.x.assign(data.x.begin(), data.x.begin() + train * data.features);
  a.y.assign(data.y.begin(), data.y.begin() + train);
  b.x.assign(data.x.begin() + train * data.features, data.x.end());
  b.y.assign(data.y.begin() + train, data.y.end());
  return {std::move(a), std::move(b)};
}

std::vector<float> LogisticRegression::Init(const core::SeedSpec&) const {
  return std::vector<float>(features_ + 1, 0.0f);
}

double LogisticRegression::LossAndGradient(std::span<const float> params,
                                           const Dataset& data,
                                           std::span<const uint32_t> batch,
                                           std::span<float> grad) const {
  if (data.classes != 2) {
    throw InvalidArgument("logistic regression needs binary labels");
  }
  std::vector<double> acc(features_ + 1, 0.0);
  double loss = 0.0;
  for (uint32_t idx : batch) {
    const auto x = data.row(idx);
    double z = params[features_];
    for (size_t f = 0; f < features_; ++f) z += static_cast<double>(params[f]) * x[f];
    const double y = data.y[idx];
    loss += Softplus(z) - y * z;
    const double err = Sigmoid(z) - y;
    for (size_t f = 0; f < features_; ++f) acc[f] += err * x[f];
    acc[features_] += err;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (size_t i = 0; i < acc.size(); ++i) grad[i] = static_cast<float>(acc[i] * inv);
  return loss * inv;
}

Evaluation LogisticRegression::Evaluate(std::span<const float> params,
                                        const Dataset& data) const {
  Evaluation e;
  size_t correct = 0;
  for (size_t i = 0; i < data.size(); ++i) {
    const auto x = data.row(i);
    double z = params[features_];
    for (size_t f = 0; f < features_; ++f) z += static_cast<double>(params[f]) * x[f];
    const double y = data.y[i];
    e.loss += Softplus(z) - y * z;
    if ((z > 0.0) == (data.y[i] == 1)) ++correct;
  }
  e.loss /= static_cast<double>(data.size());
  e.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return e;
}

std::vector<size_t> Mlp::tensor_sizes() const {
  return {hidden_ * features_, hidden_, classes_ * hidden_, classes_};
}

std::vector<float> Mlp::Init(const core::SeedSpec& seeds) const {
  core::Rng rng(seeds, core::StreamTag::kModelInit, 0);
  std::vector<float> params(num_params(), 0.0f);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(features_));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_));
  size_t i = 0;
  for (; i < hidden_ * features_; ++i) params[i] = static_cast<float>(s1 * rng.Normal());
  i += hidden_;
  for (size_t k = 0; k < classes_ * hidden_; ++k, ++i) {
    params[i] = static_cast<float>(s2 * rng.Normal());
  }
  return params;
}

void Mlp::Forward(std::span<const float> params, std::span<const float> x,
                  std::vector<double>& hidden,
                  std::vector<double>& log_probs) const {
  const float* w1 = params.data();
  const float* b1 = w1 + hidden_ * features_;
  const float* w2 = b1 + hidden_;
  const float* b2 = w2 + classes_ * hidden_;
  hidden.assign(hidden_, 0.0);
  for (size_t h = 0; h < hidden_; ++h) {
    double z = b1[h];
    const float* row = w1 + h * features_;
    for (size_t f = 0; f < features_; ++f) z += static_cast<double>(row[f]) * x[f];
    hidden[h] = std::tanh(z);
  }
  log_probs.assign(classes_, 0.0);
  double top = -INFINITY;
  for (size_t c = 0; c < classes_; ++c) {
    double z = b2[c];
    const float* row = w2 + c * hidden_;
    for (size_t h = 0; h < hidden_; ++h) z += row[h] * hidden[h];
    log_probs[c] = z;
    top = std::max(top, z);
  }
  double norm = 0.0;
  for (double z : log_probs) norm += std::exp(z - top);
  const double log_norm = top + std::log(norm);
  for (double& z : log_probs) z -= log_norm;
}

double Mlp::LossAndGradient(std::span<const float> params, const Dataset& data,
                            std::span<const uint32_t> batch,
                            std::span<float> grad) const {
  const float* w2 = params.data() + hidden_ * features_ + hidden_;
  const size_t off_b1 = hidden_ * features_;
  const size_t off_w2 = off_b1 + hidden_;
  const size_t off_b2 = off_w2 + classes_ * hidden_;
  std::vector<double> acc(num_params(), 0.0);
  std::vector<double> hidden, log_probs, dh(hidden_);
  double loss = 0.0;
  for (uint32_t idx : batch) {
    const auto x = data.row(idx);
    Forward(params, x, hidden, log_probs);
    const size_t y = static_cast<size_t>(data.y[idx]);
    loss -= log_probs[y];
    std::fill(dh.begin(), dh.end(), 0.0);
    for (size_t c = 0; c < classes_; ++c) {
      const double dz = std::exp(log_probs[c]) - (c == y ? 1.0 : 0.0);
      acc[off_b2 + c] += dz;
      double* gw2 = &acc[off_w2 + c * hidden_];
      const float* row = w2 + c * hidden_;
      for (size_t h = 0; h < hidden_; ++h) {
        gw2[h] += dz * hidden[h];
        dh[h] += dz * row[h];
      }
    }
    for (size_t h = 0; h < hidden_; ++h) {
      const double dpre = dh[h] * (1.0 - hidden[h] * hidden[h]);
      acc[off_b1 + h] += dpre;
      double* gw1 = &acc[h * features_];
      for (size_t f = 0; f < features_; ++f) gw1[f] += dpre * x[f];
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (size_t i = 0; i < acc.size(); ++i) grad[i] = static_cast<float>(acc[i] * inv);
  return loss * inv;
}

Evaluation Mlp::Evaluate(std::span<const float> params,
                         const Dataset& data) const {
  Evaluation e;
  std::vector<double> hidden, log_probs;
  size_t correct = 0;
  for (size_t i = 0; i < data.size(); ++i) {
    Forward(params, data.row(i), hidden, log_probs);
    const size_t y = static_cast<size_t>(data.y[i]);
    e.loss -= log_probs[y];
    const size_t pred =
        std::max_element(log_probs.begin(), log_probs.end()) - log_probs.begin();
    if (pred == y) ++correct;
  }
  e.loss /= static_cast<double>(data.size());
  e.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return e;
}

}  // namespace gradcomp::trainbench
