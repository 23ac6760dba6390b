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

#include "gradcomp/cli/config.h"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gradcomp/csv.h"
#include "gradcomp/error.h"

namespace gradcomp::cli {
namespace {

using nlohmann::json;

const std::set<std::string> kSchemeTypes = {
    "topk", "topkc", "topkc_perm", "thc", "powersgd", "fp16", "fp32"};

// Reads keys from one JSON object and rejects the ones nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  void Get(const std::string& key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        if (!it->is_number_unsigned()) {
          throw ConfigError(Path(key) + ": expected a non-negative integer");
        }
      }
      if constexpr (std::is_same_v<T, double>) {
        if (!it->is_number()) throw ConfigError(Path(key) + ": expected a number");
      }
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(Path(key) + ": wrong type");
    }
  }

  template <typename T>
  void Get(const std::string& key, std::optional<T>& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    T value{};
    Get(key, value);
    out = value;
  }

  // Nested object, or nullptr when absent.
  const json* Child(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string Path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void Finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + Path(key) + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

SchemeSpec ParseScheme(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  SchemeSpec s;
  r.Get("type", s.type);
  if (!kSchemeTypes.count(s.type)) {
    throw ConfigError(r.Path("type") + ": unknown scheme type '" + s.type + "'");
  }
  s.name = s.type;
  r.Get("name", s.name);
  r.Get("bits", s.bits);
  r.Get("k", s.k);
  r.Get("j", s.j);
  r.Get("chunk", s.chunk);
  r.Get("q", s.q);
  r.Get("b", s.b);
  r.Get("depth", s.depth);
  r.Get("rank", s.rank);
  r.Get("warm_start", s.warm_start);
  r.Get("min_compress_size", s.min_compress_size);
  r.Finish();
  return s;
}

json SchemeToJson(const SchemeSpec& s) {
  json j = {{"type", s.type}, {"name", s.name}};
  if (s.bits) j["bits"] = *s.bits;
  if (s.k) j["k"] = *s.k;
  if (s.j) j["j"] = *s.j;
  if (s.chunk) j["chunk"] = *s.chunk;
  if (s.type == "thc") {
    j["q"] = s.q;
    j["b"] = s.b;
    j["depth"] = s.depth;
  }
  if (s.type == "powersgd") {
    j["rank"] = s.rank;
    j["warm_start"] = s.warm_start;
    j["min_compress_size"] = s.min_compress_size;
  }
  return j;
}

std::string BitsLabel(double bits) { return FormatDouble(bits); }

}  // namespace

compress::CompressorConfig SchemeSpec::Resolve(
    size_t d, std::optional<double> override_bits) const {
  const std::optional<double> budget = override_bits ? override_bits : bits;
  if (type == "topk") {
    if (k) return compress::TopKConfig{*k};
    if (!budget) throw ConfigError("scheme '" + name + "' has no budget");
    return compress::TopKConfig{compress::TopKForBits(*budget, d)};
  }
  if (type == "topkc" || type == "topkc_perm") {
    compress::TopKCConfig c;
    c.chunk_size = chunk.value_or(budget && *budget < 1.0 ? 128 : 64);
    c.permute = type == "topkc_perm";
    if (j) {
      c.num_chunks = *j;
    } else if (budget) {
      c.num_chunks = compress::TopKCChunksForBits(*budget, d, c.chunk_size);
    } else {
      throw ConfigError("scheme '" + name + "' has no budget");
    }
    return c;
  }
  if (type == "thc") return compress::ThcConfig{q, b, depth};
  if (type == "powersgd") {
    return compress::PowerSgdConfig{rank, warm_start, min_compress_size};
  }
  return compress::DenseConfig{type == "fp16" ? 16u : 32u};
}

void ExperimentConfig::Validate() const {
  if (workers == 0) throw ConfigError("workers: must be positive");
  if (schemes.empty()) throw ConfigError("schemes: at least one is required");
  std::set<std::string> names;
  for (const SchemeSpec& s : schemes) {
    if (!kSchemeTypes.count(s.type)) {
      throw ConfigError("schemes: unknown type '" + s.type + "'");
    }
    if (s.budgeted() && !s.has_budget() && bits.empty()) {
      throw ConfigError("schemes." + s.name + ": no budget and empty bits list");
    }
    if (!names.insert(s.name).second) {
      throw ConfigError("schemes: duplicate name '" + s.name + "'");
    }
  }
  for (double b : bits) {
    if (!(b > 0.0)) throw ConfigError("bits: values must be positive");
  }
  try {
    gradients.Validate();
    for (const auto& run : ExpandSchemes(gradients.d)) {
      compress::Validate(run.config, gradients.d);
    }
    train.options.Validate();
    time_model.Validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (nmse_sweep.seeds == 0 || nmse_sweep.rounds == 0) {
    throw ConfigError("nmse_sweep: seeds and rounds must be positive");
  }
  if (train.model != "mlp" && train.model != "logreg") {
    throw ConfigError("train.model: expected 'mlp' or 'logreg'");
  }
  if (train.hidden == 0) throw ConfigError("train.hidden: must be positive");
  if (dataset.mode != "synthetic" && dataset.mode != "csv") {
    throw ConfigError("dataset.mode: expected 'synthetic' or 'csv'");
  }
  if (dataset.mode == "csv" && dataset.path.empty()) {
    throw ConfigError("dataset.path: required when dataset.mode is 'csv'");
  }
  if (!(dataset.val_fraction > 0.0 && dataset.val_fraction < 1.0)) {
    throw ConfigError("dataset.val_fraction: must lie in (0, 1)");
  }
  if (dataset.mode == "synthetic" &&
      (dataset.samples < 2 || dataset.features == 0 || dataset.classes < 2)) {
    throw ConfigError("dataset: synthetic data needs samples, features, classes");
  }
  if (collective_check.inject_element_bits &&
      (*collective_check.inject_element_bits == 0 ||
       *collective_check.inject_element_bits > 64)) {
    throw ConfigError("collective_check.inject_element_bits: must be in [1, 64]");
  }
}

std::vector<trainbench::SchemeRun> ExperimentConfig::ExpandSchemes(
    size_t d) const {
  std::vector<trainbench::SchemeRun> runs;
  for (const SchemeSpec& s : schemes) {
    if (s.budgeted() && !s.has_budget()) {
      for (double b : bits) {
        runs.push_back({s.name + "_b" + BitsLabel(b), s.Resolve(d, b)});
      }
    } else {
      runs.push_back({s.name, s.Resolve(d)});
    }
  }
  return runs;
}

std::vector<double> ExperimentConfig::ExpandedBits() const {
  std::vector<double> out;
  for (const SchemeSpec& s : schemes) {
    if (s.budgeted() && !s.has_budget()) {
      out.insert(out.end(), bits.begin(), bits.end());
    } else {
      out.push_back(s.bits ? *s.bits : std::nan(""));
    }
  }
  return out;
}

ExperimentConfig DefaultConfig() {
  ExperimentConfig c;
  for (const char* type : {"topkc", "topkc_perm", "topk", "thc", "powersgd",
                           "fp16", "fp32"}) {
    SchemeSpec s;
    s.type = type;
    s.name = type;
    c.schemes.push_back(s);
  }
  auto& o = c.train.options;
  o.batch_per_worker = 64;
  o.lr = 0.5;
  o.momentum = 0.9;
  o.max_rounds = 200;
  o.early_stop = trainbench::EarlyStopRule{30, 1e-4};
  c.time_model.compute_s_per_round = 1e-4;
  return c;
}

ExperimentConfig ParseConfig(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c = DefaultConfig();
  ObjectReader r(root, "");
  r.Get("seed", c.seed);
  r.Get("workers", c.workers);
  r.Get("bits", c.bits);
  if (const json* s = r.Child("schemes")) {
    if (!s->is_array()) throw ConfigError("schemes: expected an array");
    c.schemes.clear();
    for (size_t i = 0; i < s->size(); ++i) {
      c.schemes.push_back(
          ParseScheme((*s)[i], "schemes[" + std::to_string(i) + "]"));
    }
  }
  if (const json* g = r.Child("gradients")) {
    ObjectReader gr(*g, "gradients");
    auto& spec = c.gradients;
    gr.Get("d", spec.d);
    gr.Get("rho", spec.rho);
    gr.Get("spike_density", spec.spike_density);
    gr.Get("spike_scale", spec.spike_scale);
    gr.Get("noise_sigma", spec.noise_sigma);
    gr.Get("divergence", spec.divergence);
    gr.Get("scale", spec.scale);
    gr.Finish();
  }
  if (const json* s = r.Child("nmse_sweep")) {
    ObjectReader sr(*s, "nmse_sweep");
    sr.Get("seeds", c.nmse_sweep.seeds);
    sr.Get("rounds", c.nmse_sweep.rounds);
    sr.Get("error_feedback", c.nmse_sweep.error_feedback);
    sr.Finish();
  }
  if (const json* t = r.Child("train")) {
    ObjectReader tr(*t, "train");
    auto& o = c.train.options;
    tr.Get("model", c.train.model);
    tr.Get("hidden", c.train.hidden);
    tr.Get("batch_per_worker", o.batch_per_worker);
    tr.Get("lr", o.lr);
    tr.Get("momentum", o.momentum);
    tr.Get("max_rounds", o.max_rounds);
    tr.Get("eval_interval", o.eval_interval);
    tr.Get("smoothing_window", o.smoothing_window);
    tr.Get("error_feedback", o.error_feedback);
    tr.Get("thresholds", c.train.thresholds);
    bool early_stop = o.early_stop.has_value();
    trainbench::EarlyStopRule rule = o.early_stop.value_or(trainbench::EarlyStopRule{});
    tr.Get("early_stop", early_stop);
    tr.Get("patience", rule.patience);
    tr.Get("min_delta", rule.min_delta);
    o.early_stop = early_stop ? std::optional(rule) : std::nullopt;
    tr.Finish();
  }
  if (const json* d = r.Child("dataset")) {
    ObjectReader dr(*d, "dataset");
    auto& ds = c.dataset;
    dr.Get("mode", ds.mode);
    dr.Get("path", ds.path);
    dr.Get("label_column", ds.label_column);
    dr.Get("samples", ds.samples);
    dr.Get("features", ds.features);
    dr.Get("classes", ds.classes);
    dr.Get("separation", ds.separation);
    dr.Get("val_fraction", ds.val_fraction);
    dr.Finish();
  }
  if (const json* t = r.Child("time_model")) {
    ObjectReader tr(*t, "time_model");
    tr.Get("bandwidth_bits_per_s", c.time_model.bandwidth_bits_per_s);
    tr.Get("compute_s_per_round", c.time_model.compute_s_per_round);
    tr.Get("compression_compute_s", c.time_model.compression_compute_s);
    tr.Finish();
  }
  if (const json* k = r.Child("collective_check")) {
    ObjectReader kr(*k, "collective_check");
    kr.Get("inject_element_bits", c.collective_check.inject_element_bits);
    kr.Finish();
  }
  r.Finish();
  c.train.options.workers = c.workers;
  c.train.options.seed = c.seed;
  c.Validate();
  return c;
}

ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseConfig(ss.str());
}

std::string DumpConfig(const ExperimentConfig& c) {
  json schemes = json::array();
  for (const SchemeSpec& s : c.schemes) schemes.push_back(SchemeToJson(s));
  const auto& o = c.train.options;
  const auto rule = o.early_stop.value_or(trainbench::EarlyStopRule{});
  json root = {
      {"seed", c.seed},
      {"workers", c.workers},
      {"bits", c.bits},
      {"schemes", schemes},
      {"gradients",
       {{"d", c.gradients.d},
        {"rho", c.gradients.rho},
        {"spike_density", c.gradients.spike_density},
        {"spike_scale", c.gradients.spike_scale},
        {"noise_sigma", c.gradients.noise_sigma},
        {"divergence", c.gradients.divergence},
        {"scale", c.gradients.scale}}},
      {"nmse_sweep",
       {{"seeds", c.nmse_sweep.seeds},
        {"rounds", c.nmse_sweep.rounds},
        {"error_feedback", c.nmse_sweep.error_feedback}}},
      {"train",
       {{"model", c.train.model},
        {"hidden", c.train.hidden},
        {"batch_per_worker", o.batch_per_worker},
        {"lr", o.lr},
        {"momentum", o.momentum},
        {"max_rounds", o.max_rounds},
        {"eval_interval", o.eval_interval},
        {"smoothing_window", o.smoothing_window},
        {"error_feedback", o.error_feedback},
        {"early_stop", o.early_stop.has_value()},
        {"patience", rule.patience},
        {"min_delta", rule.min_delta},
        {"thresholds", c.train.thresholds}}},
      {"dataset",
       {{"mode", c.dataset.mode},
        {"path", c.dataset.path},
        {"label_column", c.dataset.label_column},
        {"samples", c.dataset.samples},
        {"features", c.dataset.features},
        {"classes", c.dataset.classes},
        {"separation", c.dataset.separation},
        {"val_fraction", c.dataset.val_fraction}}},
      {"time_model",
       {{"bandwidth_bits_per_s", c.time_model.bandwidth_bits_per_s},
        {"compute_s_per_round", c.time_model.compute_s_per_round},
        {"compression_compute_s", c.time_model.compression_compute_s}}},
      {"collective_check",
       {{"inject_element_bits",
         c.collective_check.inject_element_bits
             ? json(*c.collective_check.inject_element_bits)
             : json(nullptr)}}},
  };
  return root.dump(2) + "\n";
}

}  // namespace gradcomp::cli
