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

#ifndef GRADCOMP_MODELS_H_
#define GRADCOMP_MODELS_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gradcomp/vectorcore.h"

namespace gradcomp::trainbench {

// Dense feature matrix with integer class labels in [0, classes).
struct Dataset {
  size_t features = 0;
  size_t classes = 0;
  std::vector<float> x;  // size() x features, row-major
  std::vector<int32_t> y;

  size_t size() const { return y.size(); }
  std::span<const float> row(size_t i) const {
    return std::span<const float>(x).subspan(i * features, features);
  }
};

// `classes` isotropic Gaussian clusters with unit variance; centers are
// N(0, separation^2) per feature. Deterministic in (seeds, tag round).
Dataset MakeGaussianClusters(size_t samples, size_t features, size_t classes,
                             double separation, const core::SeedSpec& seeds,
                             uint64_t stream_round);

// CSV with a header row. `label_column` names the label; every other column
// must be numeric. Distinct labels are mapped to class ids in sorted order.
Dataset LoadCsvDataset(const std::string& path,
                       const std::string& label_column);

// Last `val_fraction` of the rows become the validation set.
std::pair<Dataset, Dataset> SplitDataset(const Dataset& data,
                                         double val_fraction);

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

class Model {
 public:
  virtual ~Model() = default;

  virtual std::string name() const = 0;
  // Parameter tensor sizes in flattening order.
  virtual std::vector<size_t> tensor_sizes() const = 0;
  size_t num_params() const;

  virtual std::vector<float> Init(const core::SeedSpec& seeds) const = 0;
  // Mean loss over the batch; writes the mean gradient into `grad`.
  virtual double LossAndGradient(std::span<const float> params,
                                 const Dataset& data,
                                 std::span<const uint32_t> batch,
                                 std::span<float> grad) const = 0;
  virtual Evaluation Evaluate(std::span<const float> params,
                              const Dataset& data) const = 0;
};

// Binary logistic regression: p = sigmoid(w . x + b). Labels must be 0/1.
class LogisticRegression : public Model {
 public:
  explicit LogisticRegression(size_t features) : features_(features) {}

  std::string name() const override { return "logreg"; }
  std::vector<size_t> tensor_sizes() const override { return {features_, 1}; }
  std::vector<float> Init(const core::SeedSpec& seeds) const override;
  double LossAndGradient(std::span<const float> params, const Dataset& data,
                         std::span<const uint32_t> batch,
                         std::span<float> grad) const override;
  Evaluation Evaluate(std::span<const float> params,
                      const Dataset& data) const override;

 private:
  size_t features_;
};

// One tanh hidden layer and a softmax output with cross-entropy loss.
// Parameters: W1 (hidden x features), b1, W2 (classes x hidden), b2.
class Mlp : public Model {
 public:
  Mlp(size_t features, size_t hidden, size_t classes)
      : features_(features), hidden_(hidden), classes_(classes) {}

  std::string name() const override { return "mlp"; }
  std::vector<size_t> tensor_sizes() const override;
  std::vector<float> Init(const core::SeedSpec& seeds) const override;
  double LossAndGradient(std::span<const float> params, const Dataset& data,
                         std::span<const uint32_t> batch,
                         std::span<float> grad) const override;
  Evaluation Evaluate(std::span<const float> params,
                      const Dataset& data) const override;

 private:
  // Hidden activations and class log-probabilities for one sample.
  void Forward(std::span<const float> params, std::span<const float> x,
               std::vector<double>& hidden, std::vector<double>& log_probs) const;

  size_t features_;
  size_t hidden_;
  size_t classes_;
};

}  // namespace gradcomp::trainbench

#endif  // GRADCOMP_MODELS_H_
