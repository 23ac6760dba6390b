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

#ifndef GRADCOMP_CLI_COMMANDS_H_
#define GRADCOMP_CLI_COMMANDS_H_

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "gradcomp/cli/config.h"
#include "gradcomp/trainbench.h"

namespace gradcomp::cli {

inline constexpr const char* kArtifactVersion = "1.0.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitConfigError = 2,
  kExitDiverged = 3,
};

struct NmseRow {
  std::string scheme;
  double bits = 0.0;  // nominal budget, or the measured value without one
  uint64_t seed = 0;  // trial index
  double mean_nmse = 0.0;
  double measured_bits = 0.0;
};

// Every expanded scheme on the same seeded synthetic gradients. Trial s uses
// experiment seed Derive(kTrial, s) of the configured seed, so rows with the
// same trial index are paired across schemes.
std::vector<NmseRow> NmseSweep(const ExperimentConfig& config);

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Ledger-vs-closed-form bit accounting and collective oracle checks.
std::vector<CheckResult> CollectiveChecks(const ExperimentConfig& config);

// One curve per expanded scheme on the configured dataset and model.
std::vector<trainbench::TtaCurve> TrainAll(const ExperimentConfig& config);

// FNV-1a 64 of the canonical config dump.
uint64_t ConfigHash(const ExperimentConfig& config);

// Writes `content` to a temporary sibling and renames it over `path`.
void WriteFileAtomic(const std::string& path, const std::string& content);

// Subcommands. Write their artifacts and manifest.json into out_dir and
// return an ExitCode.
int CmdNmseSweep(const ExperimentConfig& config, const std::string& out_dir,
                 std::ostream& log);
int CmdTrain(const ExperimentConfig& config, const std::string& out_dir,
             std::ostream& log);
int CmdCollectiveCheck(const ExperimentConfig& config,
                       const std::string& out_dir, std::ostream& log);

}  // namespace gradcomp::cli

#endif  // GRADCOMP_CLI_COMMANDS_H_
