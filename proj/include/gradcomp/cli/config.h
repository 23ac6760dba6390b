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

#ifndef GRADCOMP_CLI_CONFIG_H_
#define GRADCOMP_CLI_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gradcomp/compressors.h"
#include "gradcomp/metrics.h"
#include "gradcomp/synthetic.h"
#include "gradcomp/trainbench.h"

namespace gradcomp::cli {

// One entry of "schemes". TopK/TopKC budgets are given either explicitly
// (k, j) or as a bits-per-coordinate target; a missing budget makes the
// entry expand over the top-level "bits" list.
struct SchemeSpec {
  std::string type;  // topk, topkc, topkc_perm, thc, powersgd, fp16, fp32
  std::string name;  // defaults to type
  std::optional<double> bits;
  std::optional<size_t> k;
  std::optional<size_t> j;
  // TopKC chunk size C. When absent: 128 for budgets below 1 bit per
  // coordinate, 64 otherwise.
  std::optional<size_t> chunk;
  unsigned q = 4;
  unsigned b = 4;
  unsigned depth = 10;
  size_t rank = 4;
  bool warm_start = true;
  size_t min_compress_size = 4096;

  bool budgeted() const { return type == "topk" || type == "topkc" ||
                                 type == "topkc_perm"; }
  bool has_budget() const { return bits || k || j; }
  // Concrete compressor for dimension d; `bits` overrides the entry's own.
  compress::CompressorConfig Resolve(size_t d,
                                     std::optional<double> bits = {}) const;
};

struct DatasetSpec {
  std::string mode = "synthetic";  // synthetic | csv
  std::string path;
  std::string label_column = "label";
  size_t samples = 8000;
  size_t features = 128;
  size_t classes = 10;
  double separation = 0.25;
  double val_fraction = 0.25;
};

struct TrainSpec {
  std::string model = "mlp";  // mlp | logreg
  size_t hidden = 128;
  trainbench::TrainOptions options;
  std::vector<double> thresholds = {0.8};
};

struct SweepSpec {
  size_t seeds = 20;
  size_t rounds = 20;
  bool error_feedback = false;
};

struct CollectiveCheckSpec {
  // Charges the dense FP32 ring check at this many bits per element instead
  // of 32; used to demonstrate that the egress checks can fail.
  std::optional<unsigned> inject_element_bits;
};

struct ExperimentConfig {
  uint64_t seed = 1;
  size_t workers = 4;
  std::vector<SchemeSpec> schemes;
  std::vector<double> bits = {0.5, 2.0, 8.0};
  trainbench::SyntheticGradSpec gradients;
  SweepSpec nmse_sweep;
  TrainSpec train;
  DatasetSpec dataset;
  metrics::TimeModel time_model;
  CollectiveCheckSpec collective_check;

  // Throws ConfigError describing the first problem found.
  void Validate() const;
  // Scheme entries with budgets filled in, in config order. Entries without
  // a budget expand to one run per value of `bits`, named <name>_b<bits>.
  std::vector<trainbench::SchemeRun> ExpandSchemes(size_t d) const;
  // Nominal bits for each expanded run, NaN when the entry has no budget.
  std::vector<double> ExpandedBits() const;
};

ExperimentConfig DefaultConfig();
// Strict parse: unknown keys and wrong types raise ConfigError naming the
// key path. Absent keys keep their defaults.
ExperimentConfig ParseConfig(const std::string& json_text);
ExperimentConfig LoadConfig(const std::string& path);
// Every key with its effective value, pretty-printed.
std::string DumpConfig(const ExperimentConfig& config);

}  // namespace gradcomp::cli

#endif  // GRADCOMP_CLI_CONFIG_H_
