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

// Experiment runner: gradcomp <subcommand> [--config PATH] [--seed N]
// [--out DIR], or gradcomp --print-config.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gradcomp/cli/commands.h"
#include "gradcomp/cli/config.h"
#include "gradcomp/error.h"

namespace {

using gradcomp::cli::ExperimentConfig;

ExperimentConfig Resolve(const std::string& config_path,
                         std::optional<uint64_t> seed) {
  ExperimentConfig config = config_path.empty()
                                ? gradcomp::cli::DefaultConfig()
                                : gradcomp::cli::LoadConfig(config_path);
  if (seed) {
    config.seed = *seed;
    config.train.options.seed = *seed;
  }
  config.Validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient compression simulator and benchmark runner"};
  std::string config_path;
  std::optional<uint64_t> seed;
  std::string out_dir = "out";
  bool print_config = false;
  app.add_option("--config", config_path, "JSON experiment config");
  app.add_option("--seed", seed, "Override the experiment seed");
  app.add_option("--out", out_dir, "Output directory");
  app.add_flag("--print-config", print_config,
               "Print the effective config (defaults merged) and exit");

  auto* sweep = app.add_subcommand("nmse-sweep", "Mean NMSE per scheme and seed");
  auto* train = app.add_subcommand("train", "Time-to-accuracy curves");
  auto* check = app.add_subcommand("collective-check",
                                   "Bit-accounting and collective oracle checks");
  for (auto* sub : {sweep, train, check}) {
    sub->add_option("--config", config_path, "JSON experiment config");
    sub->add_option("--seed", seed, "Override the experiment seed");
    sub->add_option("--out", out_dir, "Output directory");
  }
  app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : gradcomp::cli::kExitConfigError;
  }

  try {
    const ExperimentConfig config = Resolve(config_path, seed);
    if (print_config) {
      std::cout << gradcomp::cli::DumpConfig(config);
      return 0;
    }
    if (sweep->parsed()) {
      return gradcomp::cli::CmdNmseSweep(config, out_dir, std::cerr);
    }
    if (train->parsed()) return gradcomp::cli::CmdTrain(config, out_dir, std::cerr);
    if (check->parsed()) {
      return gradcomp::cli::CmdCollectiveCheck(config, out_dir, std::cout);
    }
    std::cerr << app.help();
    return gradcomp::cli::kExitConfigError;
  } catch (const gradcomp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return gradcomp::cli::kExitConfigError;
  } catch (const gradcomp::InvalidArgument& e) {
    std::cerr << "invalid setting: " << e.what() << "\n";
    return gradcomp::cli::kExitConfigError;
  } catch (const gradcomp::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return gradcomp::cli::kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
