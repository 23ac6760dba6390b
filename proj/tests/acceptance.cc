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

// Acceptance run: one PASS/FAIL line per criterion. Exit status is non-zero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "gradcomp/cli/commands.h"
#include "gradcomp/cli/config.h"
#include "gradcomp/collectives.h"
#include "gradcomp/compressors.h"
#include "gradcomp/csv.h"
#include "gradcomp/metrics.h"
#include "gradcomp/pipelines.h"
#include "gradcomp/powersgd.h"
#include "gradcomp/transforms.h"

namespace gradcomp {
namespace {

using core::GradientVector;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c);
  return buf;
}

std::vector<float> Gaussian(size_t n, core::Rng& rng, double scale = 1.0) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(scale * rng.Normal());
  return v;
}

Outcome BitAccounting() {
  const auto results = cli::CollectiveChecks(cli::DefaultConfig());
  size_t settings = 0;
  bool has_derived = false;
  bool ok = true;
  std::string failed;
  for (const auto& r : results) {
    if (r.name.rfind("topkc_bits[", 0) == 0) {
      ++settings;
      has_derived |= r.name.find("J=7936") != std::string::npos;
    }
    if (!r.pass) {
      ok = false;
      failed += " " + r.name;
    }
  }
  ok = ok && settings >= 5 && has_derived;
  return {ok, std::to_string(results.size()) + " checks, " +
                  std::to_string(settings) + " (d,C,J,K) settings" +
                  (failed.empty() ? "" : "; failed:" + failed)};
}

Outcome CollectiveCorrectness() {
  double worst = 0.0;
  bool exact = true;
  size_t instances = 0;
  for (size_t n : {1u, 2u, 4u, 8u}) {
    for (uint64_t inst = 0; inst < 25; ++inst, ++instances) {
      core::Rng rng(core::SeedSpec{2}, core::StreamTag::kTrial, inst,
                    static_cast<uint32_t>(n));
      const size_t len = 1 + rng.UniformBelow(5000);
      std::vector<std::vector<float>> in(n);
      for (auto& v : in) v = Gaussian(len, rng, 100.0);
      const collectives::WorkerGroup group(n);
      collectives::TrafficLedger ledger;
      const auto sum = RingAllReduce(in, collectives::FloatSum{}, group,
                                     ledger, "sum");
      const auto lo = RingAllReduce(in, collectives::ElemMin{}, group,
                                    ledger, "min");
      const auto hi = RingAllReduce(in, collectives::ElemMax{}, group,
                                    ledger, "max");
      std::vector<std::vector<int32_t>> codes(n, std::vector<int32_t>(len));
      for (auto& c : codes) {
        for (int32_t& z : c) z = static_cast<int32_t>(rng.UniformBelow(31)) - 15;
      }
      collectives::OverflowStats stats;
      const auto isum = RingAllReduce(codes, collectives::SatIntSum{8}, group,
                                      ledger, "sat", stats);
      exact = exact && stats.clip_events == 0;
      for (size_t i = 0; i < len; ++i) {
        double naive = 0.0, mag = 0.0;
        float mn = in[0][i], mx = in[0][i];
        int32_t isum_naive = 0;
        for (size_t w = 0; w < n; ++w) {
          naive += in[w][i];
          mag += std::fabs(in[w][i]);
          mn = std::min(mn, in[w][i]);
          mx = std::max(mx, in[w][i]);
          isum_naive += codes[w][i];
        }
        for (size_t w = 0; w < n; ++w) {
          if (mag > 0) worst = std::max(worst, std::fabs(sum[w][i] - naive) / mag);
          exact = exact && lo[w][i] == mn && hi[w][i] == mx &&
                  isum[w][i] == isum_naive && sum[w][i] == sum[0][i];
        }
      }
    }
  }
  return {worst <= 1e-6 && exact,
          std::to_string(instances) + " instances, worst relative error " +
              Fmt("%.2e", worst) + (exact ? ", min/max/satint exact"
                                          : ", exact oracle mismatch")};
}

Outcome TransformSuite() {
  bool block_exact = true;
  double worst_round_trip = 0.0;
  double worst_norm = 0.0;
  for (unsigned l = 4; l <= 16; ++l) {
    const size_t d = size_t{1} << l;
    core::Rng rng(l);
    const auto v = GradientVector::Pad(Gaussian(d, rng));
    const auto full = transforms::RotationSpec::Draw(d, l, core::SeedSpec{l}, 0);
    for (unsigned depth = 0; depth <= l; ++depth) {
      const auto spec = transforms::RotationSpec::FromSigns(full.signs(), depth);
      const auto rotated = transforms::RhtForward(v, spec);
      // Independent full-depth rotation of every block.
      const size_t block = size_t{1} << depth;
      for (size_t start = 0; start < d && block_exact; start += block) {
        std::vector<float> piece(v.values().begin() + start,
                                 v.values().begin() + start + block);
        std::vector<int8_t> signs(full.signs().begin() + start,
                                  full.signs().begin() + start + block);
        const auto out = transforms::RhtForward(
            GradientVector::Pad(piece),
            transforms::RotationSpec::FromSigns(signs, depth));
        for (size_t i = 0; i < block; ++i) {
          block_exact = block_exact && out[i] == rotated[start + i];
        }
      }
      const auto back = transforms::RhtInverse(rotated, spec);
      double err = 0.0;
      for (size_t i = 0; i < d; ++i) {
        err = std::max(err, static_cast<double>(std::fabs(back[i] - v[i])));
      }
      worst_round_trip = std::max(worst_round_trip, err);
      worst_norm = std::max(
          worst_norm,
          std::fabs(std::sqrt(rotated.SquaredNorm() / v.SquaredNorm()) - 1.0));
    }
  }
  return {block_exact && worst_round_trip <= 1e-6 && worst_norm <= 1e-6,
          std::string(block_exact ? "block-wise identical" : "block mismatch") +
              Fmt(", max round-trip error %.2e, max norm deviation %.2e",
                  worst_round_trip, worst_norm)};
}

// Each draw quantizes one coordinate; a vector of `draws` copies of x
// consumes one independent uniform per copy.
Outcome Unbiasedness() {
  const size_t draws = 100000;
  const compress::QuantRange range{-1.5f, 2.5f};
  const std::vector<compress::QuantRange> ranges = {range};
  core::Rng pick(4);
  double worst_z = 0.0;
  size_t points = 0;
  for (unsigned q : {2u, 4u, 8u}) {
    for (int p = 0; p < 10; ++p, ++points) {
      const float x = static_cast<float>(range.lo +
                                         (range.hi - range.lo) * pick.Uniform());
      const auto v = GradientVector::Pad(std::vector<float>(draws, x));
      const size_t padded = v.padded_len();
      core::Rng rng(core::SeedSpec{4}, core::StreamTag::kQuantRounding, q, p);
      const auto r = compress::ThcQuantize(v, padded, ranges, q, rng);
      std::vector<int32_t> codes(r.payload.codes.begin(), r.payload.codes.end());
      const auto deq = compress::ThcDequantize(codes, ranges, padded, q, 1);
      double sum = 0.0;
      for (size_t i = 0; i < draws; ++i) sum += deq[i];
      const double mean = sum / draws;
      const compress::QuantGrid grid{range.lo, range.hi, q};
      const double t = (x - grid.lo) / grid.step();
      const double f = t - std::floor(t);
      const double sigma = grid.step() * std::sqrt(f * (1.0 - f) / draws);
      const double err = std::fabs(mean - x);
      // Float slack for a point that lies on the grid.
      const double z = sigma > 0 ? err / sigma : (err < 1e-6 ? 0.0 : 1e9);
      worst_z = std::max(worst_z, z);
    }
  }
  return {worst_z <= 3.0, std::to_string(points) + " points x 1e5 draws, " +
                              Fmt("worst deviation %.2f sigma", worst_z)};
}

Outcome NmseTrend() {
  auto config = cli::ParseConfig(R"({
    "seed": 1,
    "bits": [0.5, 2, 8],
    "schemes": [{"type": "topkc"}, {"type": "topkc_perm"}, {"type": "topk"}],
    "gradients": {"d": 65536, "rho": 0.99},
    "nmse_sweep": {"seeds": 20, "rounds": 20}
  })");
  const auto rows = cli::NmseSweep(config);
  std::string detail;
  bool ok = true;
  for (double b : config.bits) {
    const std::string suffix = "_b" + FormatDouble(b);
    size_t wins_perm = 0, wins_topk = 0, seeds = 0;
    double m_kc = 0, m_perm = 0, m_k = 0;
    for (uint64_t s = 0; s < config.nmse_sweep.seeds; ++s) {
      double kc = NAN, perm = NAN, k = NAN;
      for (const auto& r : rows) {
        if (r.seed != s) continue;
        if (r.scheme == "topkc" + suffix) kc = r.mean_nmse;
        if (r.scheme == "topkc_perm" + suffix) perm = r.mean_nmse;
        if (r.scheme == "topk" + suffix) k = r.mean_nmse;
      }
      ++seeds;
      wins_perm += kc < perm;
      wins_topk += kc <= k;
      m_kc += kc;
      m_perm += perm;
      m_k += k;
    }
    const double frac_perm = static_cast<double>(wins_perm) / seeds;
    const double frac_topk = static_cast<double>(wins_topk) / seeds;
    ok = ok && frac_perm >= 0.9 && frac_topk >= 0.9;
    detail += Fmt(" b=%g:", b) +
              Fmt(" kc %.3f perm %.3f", m_kc / seeds, m_perm / seeds) +
              Fmt(" topk %.3f", m_k / seeds) +
              Fmt(" (%.0f%%/%.0f%%)", 100 * frac_perm, 100 * frac_topk) + ";";
  }
  return {ok, "mean NMSE and paired win rates vs perm/topk:" + detail};
}

Outcome SaturationTrend() {
  const size_t n = 4;
  const size_t d = size_t{1} << 20;
  const collectives::WorkerGroup group(n);
  collectives::OverflowStats narrow_stats;
  double nmse4 = 0.0, nmse8 = 0.0;
  const int seeds = 5;
  for (int s = 0; s < seeds; ++s) {
    std::vector<GradientVector> grads;
    for (size_t w = 0; w < n; ++w) {
      core::Rng rng(core::SeedSpec{6}, core::StreamTag::kTrial, s,
                    static_cast<uint32_t>(w));
      grads.push_back(GradientVector::Pad(Gaussian(d, rng)));
    }
    const core::SeedSpec seeds_s{static_cast<uint64_t>(100 + s)};
    const auto r4 = pipelines::RunThcRound(grads, compress::ThcConfig{4, 4, 10},
                                           group, seeds_s, 0);
    const auto r8 = pipelines::RunThcRound(grads, compress::ThcConfig{4, 8, 10},
                                           group, seeds_s, 0);
    narrow_stats.Merge(r4.overflow);
    nmse4 += r4.nmse / seeds;
    nmse8 += r8.nmse / seeds;
  }
  const double rate = metrics::OverflowRate(narrow_stats);
  const double rel = std::fabs(nmse4 - nmse8) / nmse8;
  return {rate < 0.01 && rel <= 0.10,
          Fmt("overflow rate %.3f%%, NMSE b=4 %.5f vs b=8 %.5f", 100 * rate,
              nmse4, nmse8) +
              Fmt(" (%.1f%% relative)", 100 * rel)};
}

Outcome PowerSgdProperties() {
  using compress::Matrix;
  double worst_exact = 0.0;
  double worst_orth = 0.0;
  size_t monotone_violations = 0;
  for (size_t r : {1u, 4u, 16u}) {
    for (size_t rank = 1; rank <= r; rank = rank * 2) {
      core::Rng rng(100 * r + rank);
      const Matrix m = compress::MatMulTranspose(
          compress::RandomGaussian(64, rank, rng),
          compress::RandomGaussian(64, rank, rng));
      compress::PowerSgdCompressor c(compress::PowerSgdConfig{r, false, 0},
                                     core::SeedSpec{r + rank});
      const auto payload = c.Compress(m, 0);
      const auto approx = compress::PowerSgdDecompress(payload);
      worst_exact = std::max(worst_exact,
                             compress::Subtract(approx, m).FrobeniusNorm() /
                                 m.FrobeniusNorm());
    }
  }
  for (uint64_t seed = 0; seed < 20; ++seed) {
    core::Rng rng(core::SeedSpec{7}, core::StreamTag::kTrial, seed);
    const Matrix m = compress::RandomGaussian(64, 64, rng);
    double previous = std::numeric_limits<double>::infinity();
    for (size_t r : {1u, 4u, 16u}) {
      compress::PowerSgdCompressor c(compress::PowerSgdConfig{r, false, 0},
                                     core::SeedSpec{seed});
      const auto payload = c.Compress(m, 0);
      const Matrix p(64, r, payload.p);
      const Matrix gram = compress::MatTransposeMul(p, p);
      for (size_t i = 0; i < r; ++i) {
        for (size_t j = 0; j < r; ++j) {
          worst_orth = std::max(
              worst_orth, std::fabs(gram(i, j) - (i == j ? 1.0 : 0.0)));
        }
      }
      const double err =
          compress::Subtract(compress::PowerSgdDecompress(payload), m)
              .FrobeniusNorm() /
          m.FrobeniusNorm();
      monotone_violations += err > previous;
      previous = err;
    }
  }
  return {worst_exact <= 1e-4 && worst_orth <= 1e-5 && monotone_violations == 0,
          Fmt("worst low-rank recovery error %.2e, orthogonality residual "
              "%.2e, ",
              worst_exact, worst_orth) +
              std::to_string(monotone_violations) + " rank-order violations"};
}

double TtaOrInf(const trainbench::TtaCurve& c, double threshold) {
  return c.TimeTo(threshold).value_or(std::numeric_limits<double>::infinity());
}

Outcome TtaOrdering() {
  bool ok = true;
  std::string detail;
  for (uint64_t seed = 1; seed <= 3; ++seed) {
    auto config = cli::ParseConfig(R"({
      "schemes": [{"type": "topkc", "name": "topkc_b0.5", "bits": 0.5},
                  {"type": "topkc", "name": "topkc_b2", "bits": 2},
                  {"type": "thc"}, {"type": "fp16"}, {"type": "fp32"}],
      "train": {"lr": 0.5, "momentum": 0.9, "batch_per_worker": 64,
                "early_stop": false, "max_rounds": 200, "thresholds": [0.8]}
    })");
    config.seed = seed;
    config.train.options.seed = seed;
    const double thr = config.train.thresholds[0];
    const auto curves = cli::TrainAll(config);
    auto find = [&](const std::string& name) -> const trainbench::TtaCurve& {
      for (const auto& c : curves) {
        if (c.scheme == name) return c;
      }
      throw std::runtime_error("missing curve " + name);
    };
    const auto& fp16 = find("fp16");
    const auto& fp32 = find("fp32");
    const auto& aggressive = find("topkc_b0.5");
    const double t16 = TtaOrInf(fp16, thr);
    const double t32 = TtaOrInf(fp32, thr);
    double best_moderate = std::numeric_limits<double>::infinity();
    for (const char* name : {"topkc_b2", "thc"}) {
      best_moderate = std::min(best_moderate, TtaOrInf(find(name), thr));
    }
    const double t_aggr = TtaOrInf(aggressive, thr);
    const bool seed_ok =
        std::isfinite(t16) && t16 < t32 && best_moderate < t16 &&
        aggressive.mean_round_seconds < fp16.mean_round_seconds &&
        t_aggr > t16;
    ok = ok && seed_ok;
    detail += " seed " + std::to_string(seed) +
              Fmt(": fp32 %.2e fp16 %.2e best moderate %.2e", t32, t16,
                  best_moderate) +
              (std::isfinite(t_aggr) ? Fmt(" b0.5 %.2e", t_aggr)
                                     : std::string(" b0.5 not reached")) +
              Fmt(" (round %.1e s vs fp16 %.1e s);",
                  aggressive.mean_round_seconds, fp16.mean_round_seconds);
  }
  return {ok, "time to 0.8 accuracy (s):" + detail};
}

std::string Slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome Determinism() {
  const auto root = std::filesystem::temp_directory_path() /
                    ("gradcomp_acceptance_" + std::to_string(::getpid()));
  auto sweep = cli::ParseConfig(R"({
    "bits": [2], "gradients": {"d": 16384},
    "nmse_sweep": {"seeds": 2, "rounds": 3}
  })");
  auto train = cli::ParseConfig(R"({
    "dataset": {"samples": 1000, "features": 32},
    "train": {"max_rounds": 30, "hidden": 32}
  })");
  const auto config = cli::DefaultConfig();
  std::ostringstream log;
  size_t compared = 0;
  bool ok = true;
  for (int rep = 0; rep < 2; ++rep) {
    const auto dir = root / std::to_string(rep);
    std::filesystem::create_directories(dir);
    cli::CmdNmseSweep(sweep, (dir / "sweep").string(), log);
    cli::CmdTrain(train, (dir / "train").string(), log);
    cli::CmdCollectiveCheck(config, (dir / "check").string(), log);
  }
  for (const auto& entry :
       std::filesystem::recursive_directory_iterator(root / "0")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), root / "0");
    const auto a = Slurp(entry.path());
    const auto b = Slurp(root / "1" / rel);
    ok = ok && !a.empty() && a == b;
    ++compared;
  }
  std::filesystem::remove_all(root);
  ok = ok && compared >= 7;
  return {ok, std::to_string(compared) + " artifact files compared"};
}

struct Criterion {
  const char* id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace gradcomp

int main() {
  using namespace gradcomp;
  const std::vector<Criterion> criteria = {
      {"AC1", "bit accounting", 10, BitAccounting},
      {"AC2", "collective correctness", 30, CollectiveCorrectness},
      {"AC3", "transform suite", 30, TransformSuite},
      {"AC4", "quantization unbiasedness", 60, Unbiasedness},
      {"AC5", "NMSE trend", 300, NmseTrend},
      {"AC6", "saturation trend", 120, SaturationTrend},
      {"AC7", "PowerSGD properties", 60, PowerSgdProperties},
      {"AC8", "TTA ordering", 600, TtaOrdering},
      {"AC9", "determinism", 60, Determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count();
    const bool in_time = s < c.budget_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("[%s] %s %s: %s (%.1f s, limit %.0f s%s)\n",
                pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), s,
                c.budget_s, in_time ? "" : ", over time");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n",
              static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
