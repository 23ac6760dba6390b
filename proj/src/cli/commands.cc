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

#include "gradcomp/cli/commands.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "gradcomp/collectives.h"
#include "gradcomp/csv.h"
#include "gradcomp/error.h"
#include "gradcomp/models.h"
#include "gradcomp/pipelines.h"
#include "gradcomp/synthetic.h"

namespace gradcomp::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string Hex64(uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

void WriteManifest(const ExperimentConfig& config, const std::string& out_dir,
                   const std::string& command,
                   const std::vector<std::string>& outputs) {
  json m = {{"command", command},
            {"version", kArtifactVersion},
            {"seed", config.seed},
            {"config_hash", Hex64(ConfigHash(config))},
            {"outputs", outputs}};
  WriteFileAtomic((fs::path(out_dir) / "manifest.json").string(),
                  m.dump(2) + "\n");
}

std::vector<core::GradientVector> NormalGradients(size_t n, size_t d,
                                                  uint64_t seed) {
  std::vector<core::GradientVector> out;
  for (size_t w = 0; w < n; ++w) {
    core::Rng rng(core::SeedSpec{seed}, core::StreamTag::kTrial, 0,
                  static_cast<uint32_t>(w));
    std::vector<float> v(d);
    for (float& x : v) x = static_cast<float>(rng.Normal());
    out.push_back(core::GradientVector::Pad(v));
  }
  return out;
}

struct BitSetting {
  size_t d;
  size_t chunk;
  size_t j;
  size_t k;
};

void CheckBitAccounting(const ExperimentConfig& config, const BitSetting& s,
                        std::vector<CheckResult>& out) {
  const collectives::WorkerGroup group(config.workers);
  const auto grads = NormalGradients(config.workers, s.d, config.seed);
  const std::string tag = "d=" + std::to_string(s.d) + ",C=" +
                          std::to_string(s.chunk) + ",J=" +
                          std::to_string(s.j) + ",K=" + std::to_string(s.k);

  compress::TopKCConfig kc{s.chunk, s.j, false};
  const auto topkc = pipelines::RunTopKCRound(grads, kc, group,
                                              core::SeedSpec{config.seed}, 0);
  // 16 (J C / d + 1 / C) per coordinate, as an exact integer total.
  const uint64_t want_c = 16 * (s.j * s.chunk + s.d / s.chunk);
  const uint64_t got_c = topkc.ledger.InputBits();
  out.push_back({"topkc_bits[" + tag + "]", got_c == want_c,
                 "ledger " + std::to_string(got_c) + " bits, formula " +
                     std::to_string(want_c) + " (" +
                     FormatDouble(topkc.ledger.BitsPerCoordinate(s.d)) +
                     " bits/coord)"});

  const auto topk =
      pipelines::RunTopKRound(grads, compress::TopKConfig{s.k}, group);
  const uint64_t want_k = 48 * s.k;
  const uint64_t got_k = topk.ledger.InputBits();
  out.push_back({"topk_bits[" + tag + "]", got_k == want_k,
                 "ledger " + std::to_string(got_k) + " bits, formula " +
                     std::to_string(want_k)});
}

// Dense FP32 ring all-reduce egress 2 (n-1) ceil(d/n) 32 per worker. The
// element width charged to the ledger can be overridden to inject a fault.
CheckResult CheckRingEgress(const ExperimentConfig& config, size_t d) {
  const size_t n = config.workers;
  const collectives::WorkerGroup group(n);
  const auto grads = NormalGradients(n, d, config.seed + 1);
  std::vector<std::vector<float>> inputs;
  for (const auto& g : grads) inputs.push_back(g.ToVector());
  collectives::TrafficLedger ledger;
  collectives::RingAllReduce(inputs, collectives::FloatSum{}, group, ledger,
                             "dense", config.collective_check.inject_element_bits);
  const uint64_t block = (d + n - 1) / n;
  const uint64_t want = 2 * (n - 1) * block * 32;
  const uint64_t got = ledger.MaxWorkerEgress();
  return {"ring_egress_fp32[d=" + std::to_string(d) + "]", got == want,
          "max egress " + std::to_string(got) + " bits, formula " +
              std::to_string(want)};
}

CheckResult CheckRingSum(const ExperimentConfig& config) {
  const size_t n = config.workers;
  const collectives::WorkerGroup group(n);
  double worst = 0.0;
  bool ok = true;
  for (uint64_t inst = 0; inst < 20; ++inst) {
    const size_t d = 1000 + 37 * inst;
    const auto grads = NormalGradients(n, d, config.seed * 1000 + inst);
    std::vector<std::vector<float>> inputs;
    for (const auto& g : grads) inputs.push_back(g.ToVector());
    collectives::TrafficLedger ledger;
    const auto out = collectives::RingAllReduce(inputs, collectives::FloatSum{},
                                                group, ledger, "sum");
    for (size_t i = 0; i < d; ++i) {
      double naive = 0.0;
      double scale = 0.0;
      for (size_t w = 0; w < n; ++w) {
        naive += inputs[w][i];
        scale += std::fabs(inputs[w][i]);
      }
      const double err = std::fabs(out[0][i] - naive) / std::max(scale, 1e-30);
      worst = std::max(worst, err);
    }
    for (size_t w = 1; w < n; ++w) ok = ok && out[w] == out[0];
  }
  ok = ok && worst <= 1e-6;
  return {"ring_floatsum_vs_naive", ok,
          "worst relative error " + FormatDouble(worst)};
}

CheckResult CheckMinMax(const ExperimentConfig& config) {
  const size_t n = config.workers;
  const collectives::WorkerGroup group(n);
  const auto grads = NormalGradients(n, 777, config.seed + 2);
  std::vector<std::vector<float>> inputs;
  for (const auto& g : grads) inputs.push_back(g.ToVector());
  collectives::TrafficLedger ledger;
  const auto lo = collectives::RingAllReduce(inputs, collectives::ElemMin{},
                                             group, ledger, "min");
  const auto hi = collectives::RingAllReduce(inputs, collectives::ElemMax{},
                                             group, ledger, "max");
  bool ok = true;
  for (size_t i = 0; i < 777; ++i) {
    float mn = inputs[0][i];
    float mx = inputs[0][i];
    for (size_t w = 1; w < n; ++w) {
      mn = std::min(mn, inputs[w][i]);
      mx = std::max(mx, inputs[w][i]);
    }
    for (size_t w = 0; w < n; ++w) ok = ok && lo[w][i] == mn && hi[w][i] == mx;
  }
  return {"ring_min_max_exact", ok, ok ? "exact" : "mismatch"};
}

CheckResult CheckSatNoClip(const ExperimentConfig& config) {
  const size_t n = config.workers;
  const collectives::WorkerGroup group(n);
  const unsigned bits = 16;
  // |code| <= limit / n keeps every partial sum in range.
  const int32_t bound = collectives::SatLimit(bits) / static_cast<int32_t>(n);
  core::Rng rng(core::SeedSpec{config.seed}, core::StreamTag::kTrial, 1);
  std::vector<std::vector<int32_t>> inputs(n, std::vector<int32_t>(500));
  for (auto& v : inputs) {
    for (int32_t& x : v) {
      x = static_cast<int32_t>(rng.UniformBelow(2 * bound + 1)) - bound;
    }
  }
  collectives::TrafficLedger ledger;
  collectives::OverflowStats stats;
  const auto out = collectives::RingAllReduce(
      inputs, collectives::SatIntSum{bits}, group, ledger, "sat", stats);
  bool ok = stats.clip_events == 0;
  for (size_t i = 0; i < 500; ++i) {
    int64_t sum = 0;
    for (size_t w = 0; w < n; ++w) sum += inputs[w][i];
    for (size_t w = 0; w < n; ++w) ok = ok && out[w][i] == sum;
  }
  return {"ring_satint_no_clip_exact", ok,
          std::to_string(stats.clip_events) + " clip events"};
}

CheckResult CheckSingleWorkerTraffic(const ExperimentConfig& config) {
  if (config.workers != 1) {
    return {"single_worker_zero_traffic", true, "skipped (n > 1)"};
  }
  const collectives::WorkerGroup group(1);
  const auto grads = NormalGradients(1, 4096, config.seed);
  const auto r = pipelines::RunTopKCRound(
      grads, compress::TopKCConfig{64, 8, false}, group,
      core::SeedSpec{config.seed}, 0);
  const bool ok = r.ledger.TotalSent() == 0 && r.ledger.TotalReceived() == 0;
  return {"single_worker_zero_traffic", ok,
          std::to_string(r.ledger.TotalSent()) + " bits sent"};
}

std::unique_ptr<trainbench::Model> MakeModel(const ExperimentConfig& config,
                                             const trainbench::Dataset& data) {
  if (config.train.model == "logreg") {
    if (data.classes != 2) {
      throw ConfigError("train.model 'logreg' needs a two-class dataset");
    }
    return std::make_unique<trainbench::LogisticRegression>(data.features);
  }
  return std::make_unique<trainbench::Mlp>(data.features, config.train.hidden,
                                           data.classes);
}

}  // namespace

std::vector<NmseRow> NmseSweep(const ExperimentConfig& config) {
  const size_t d = config.gradients.d;
  const auto runs = config.ExpandSchemes(d);
  const auto nominal = config.ExpandedBits();
  std::vector<NmseRow> rows;
  for (uint64_t trial = 0; trial < config.nmse_sweep.seeds; ++trial) {
    const core::SeedSpec seeds{
        core::SeedSpec{config.seed}.Derive(core::StreamTag::kTrial, trial)};
    std::vector<pipelines::Aggregator> aggs;
    for (const auto& run : runs) {
      aggs.emplace_back(run.config, config.workers, d, seeds,
                        config.nmse_sweep.error_feedback);
    }
    std::vector<double> nmse(runs.size(), 0.0);
    std::vector<double> bits(runs.size(), 0.0);
    for (uint64_t round = 0; round < config.nmse_sweep.rounds; ++round) {
      const auto grads = trainbench::GenWorkerGradients(config.gradients, seeds,
                                                        config.workers, round);
      for (size_t i = 0; i < runs.size(); ++i) {
        const auto r = aggs[i].Aggregate(grads, round);
        nmse[i] += r.nmse;
        bits[i] += r.ledger.BitsPerCoordinate(d);
      }
    }
    const double inv = 1.0 / static_cast<double>(config.nmse_sweep.rounds);
    for (size_t i = 0; i < runs.size(); ++i) {
      const double measured = bits[i] * inv;
      rows.push_back({runs[i].name,
                      std::isnan(nominal[i]) ? measured : nominal[i], trial,
                      nmse[i] * inv, measured});
    }
  }
  return rows;
}

std::vector<CheckResult> CollectiveChecks(const ExperimentConfig& config) {
  std::vector<CheckResult> out;
  const std::vector<BitSetting> settings = {
      {size_t{1} << 20, 64, 7936, 174763},
      {size_t{1} << 16, 64, 16, 1365},
      {size_t{1} << 12, 32, 8, 100},
      {1024, 16, 1, 1},
      {size_t{1} << 18, 128, 100, 5000},
  };
  for (const auto& s : settings) CheckBitAccounting(config, s, out);
  // The budget helpers must reproduce the b = 8 setting above.
  const size_t j = compress::TopKCChunksForBits(8.0, size_t{1} << 20, 64);
  const size_t k = compress::TopKForBits(8.0, size_t{1} << 20);
  out.push_back({"budget_b8_d2^20", j == 7936 && k == 174763,
                 "J=" + std::to_string(j) + " K=" + std::to_string(k)});
  out.push_back(CheckRingEgress(config, size_t{1} << 16));
  out.push_back(CheckRingEgress(config, 1000));
  out.push_back(CheckRingSum(config));
  out.push_back(CheckMinMax(config));
  out.push_back(CheckSatNoClip(config));
  out.push_back(CheckSingleWorkerTraffic(config));
  return out;
}

std::vector<trainbench::TtaCurve> TrainAll(const ExperimentConfig& config) {
  trainbench::Dataset data;
  if (config.dataset.mode == "csv") {
    data = trainbench::LoadCsvDataset(config.dataset.path,
                                      config.dataset.label_column);
  } else {
    data = trainbench::MakeGaussianClusters(
        config.dataset.samples, config.dataset.features, config.dataset.classes,
        config.dataset.separation, core::SeedSpec{config.seed}, 0);
  }
  const auto [train, val] =
      trainbench::SplitDataset(data, config.dataset.val_fraction);
  const auto model = MakeModel(config, data);
  std::vector<trainbench::SchemeRun> runs;
  try {
    runs = config.ExpandSchemes(model->num_params());
    for (const auto& run : runs) {
      compress::Validate(run.config, model->num_params());
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  std::vector<trainbench::TtaCurve> curves;
  for (const auto& run : runs) {
    curves.push_back(trainbench::Train(*model, train, val, run,
                                       config.train.options, config.time_model));
  }
  return curves;
}

uint64_t ConfigHash(const ExperimentConfig& config) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : DumpConfig(config)) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void WriteFileAtomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
    out << content;
    if (!out.flush()) throw std::runtime_error("write failed for '" + tmp + "'");
  }
  fs::rename(tmp, path);
}

int CmdNmseSweep(const ExperimentConfig& config, const std::string& out_dir,
                 std::ostream& log) {
  fs::create_directories(out_dir);
  const auto rows = NmseSweep(config);
  std::ostringstream csv;
  csv << "scheme,b,seed,mean_nmse,measured_bits_per_coord\n";
  for (const auto& r : rows) {
    csv << r.scheme << ',' << FormatDouble(r.bits) << ',' << r.seed << ','
        << FormatDouble(r.mean_nmse) << ',' << FormatDouble(r.measured_bits)
        << '\n';
  }
  WriteFileAtomic((fs::path(out_dir) / "nmse.csv").string(), csv.str());
  WriteManifest(config, out_dir, "nmse-sweep", {"nmse.csv"});
  log << "wrote " << rows.size() << " rows to "
      << (fs::path(out_dir) / "nmse.csv").string() << "\n";
  return kExitOk;
}

int CmdTrain(const ExperimentConfig& config, const std::string& out_dir,
             std::ostream& log) {
  fs::create_directories(out_dir);
  const auto curves = TrainAll(config);
  std::ostringstream csv;
  trainbench::WriteCurveCsvHeader(csv);
  json summary = json::array();
  bool diverged = false;
  for (const auto& c : curves) {
    trainbench::WriteCurveCsvRows(csv, c);
    json tta = json::object();
    for (double t : config.train.thresholds) {
      const auto at = c.TimeTo(t);
      tta[FormatDouble(t)] = at ? json(*at) : json(nullptr);
    }
    summary.push_back({{"scheme", c.scheme},
                       {"rounds", c.points.empty() ? 0 : c.points.back().round},
                       {"final_metric", c.final_metric()},
                       {"mean_round_seconds", c.mean_round_seconds},
                       {"time_to_threshold", tta},
                       {"diverged", c.diverged},
                       {"stopped_early", c.stopped_early}});
    diverged = diverged || c.diverged;
    log << c.scheme << ": final " << FormatDouble(c.final_metric())
        << (c.diverged ? " (diverged)" : "") << "\n";
  }
  WriteFileAtomic((fs::path(out_dir) / "tta.csv").string(), csv.str());
  WriteFileAtomic((fs::path(out_dir) / "summary.json").string(),
                  json{{"schemes", summary}}.dump(2) + "\n");
  WriteManifest(config, out_dir, "train", {"tta.csv", "summary.json"});
  return diverged ? kExitDiverged : kExitOk;
}

int CmdCollectiveCheck(const ExperimentConfig& config,
                       const std::string& out_dir, std::ostream& log) {
  fs::create_directories(out_dir);
  const auto checks = CollectiveChecks(config);
  std::ostringstream report;
  bool all = true;
  for (const auto& c : checks) {
    report << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
    all = all && c.pass;
  }
  log << report.str();
  WriteFileAtomic((fs::path(out_dir) / "collective_check.txt").string(),
                  report.str());
  WriteManifest(config, out_dir, "collective-check", {"collective_check.txt"});
  return all ? kExitOk : kExitCheckFailed;
}

}  // namespace gradcomp::cli
