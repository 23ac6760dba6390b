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

#include "gradcomp/collectives.h"

#include <algorithm>
#include <limits>

#include "gradcomp/error.h"
#include "gradcomp/vectorcore.h"

namespace gradcomp::collectives {
namespace {

void CheckInputs(size_t num_inputs, const WorkerGroup& group) {
  if (num_inputs != group.size()) {
    throw InvalidArgument("expected " + std::to_string(group.size()) +
                          " worker buffers, got " +
                          std::to_string(num_inputs));
  }
}

// Message-level simulation shared by all element types. `combine(acc, own)`
// folds an incoming partial result into the receiver's block; `wire` maps
// a value to what actually travels on the link.
template <typename T, typename Combine, typename Wire>
std::vector<std::vector<T>> RingAllReduceImpl(
    std::span<const std::vector<T>> inputs, T neutral, Combine combine,
    Wire wire, unsigned element_bits, const WorkerGroup& group,
    TrafficLedger& ledger, const std::string& phase) {
  CheckInputs(inputs.size(), group);
  const size_t n = group.size();
  const size_t len = inputs[0].size();
  for (const auto& buf : inputs) {
    if (buf.size() != len) {
      throw InvalidArgument("all-reduce buffers differ in length");
    }
  }
  const size_t phase_id = ledger.BeginPhase(phase, n);
  for (size_t w = 0; w < n; ++w) {
    ledger.RecordInput(phase_id, w, static_cast<uint64_t>(len) * element_bits);
  }

  const size_t block = (len + n - 1) / n;
  std::vector<std::vector<T>> bufs(n);
  for (size_t w = 0; w < n; ++w) {
    bufs[w].assign(block * n, neutral);
    std::copy(inputs[w].begin(), inputs[w].end(), bufs[w].begin());
  }
  const uint64_t block_bits = static_cast<uint64_t>(block) * element_bits;
  auto block_begin = [&](size_t b) { return b * block; };

  // Reduce-scatter. At step s worker w forwards block (w - s) mod n; the
  // sent and received blocks of a worker differ within a step.
  std::vector<T> message(block);
  for (size_t s = 0; s + 1 < n; ++s) {
    for (size_t w = 0; w < n; ++w) {
      const size_t b = (w + n - s) % n;
      const size_t to = group.next(w);
      for (size_t k = 0; k < block; ++k) {
        message[k] = wire(bufs[w][block_begin(b) + k]);
      }
      for (size_t k = 0; k < block; ++k) {
        T& own = bufs[to][block_begin(b) + k];
        own = combine(message[k], own);
      }
      ledger.RecordTransfer(phase_id, w, to, block_bits);
    }
  }
  // The final holder of block b is worker b - 1; it adopts the wire form so
  // every replica is identical after the gather.
  for (size_t b = 0; b < n; ++b) {
    const size_t holder = (b + n - 1) % n;
    for (size_t k = 0; k < block; ++k) {
      T& v = bufs[holder][block_begin(b) + k];
      v = wire(v);
    }
  }
  // All-gather. At step s worker w forwards block (w + 1 - s) mod n.
  for (size_t s = 0; s + 1 < n; ++s) {
    for (size_t w = 0; w < n; ++w) {
      const size_t b = (w + 1 + n - s) % n;
      const size_t to = group.next(w);
      std::copy_n(bufs[w].begin() + block_begin(b), block,
                  bufs[to].begin() + block_begin(b));
      ledger.RecordTransfer(phase_id, w, to, block_bits);
    }
  }
  for (auto& buf : bufs) buf.resize(len);
  return bufs;
}

}  // namespace

WorkerGroup::WorkerGroup(size_t n) : n_(n) {
  if (n == 0) throw InvalidArgument("worker group needs at least one worker");
}

int32_t SatLimit(unsigned bits) {
  if (bits < 2 || bits > 31) {
    throw InvalidArgument("saturation width must be in [2, 31] bits");
  }
  return (int32_t{1} << (bits - 1)) - 1;
}

int32_t Sat(int32_t x, int32_t y, unsigned bits) {
  const int64_t limit = SatLimit(bits);
  const int64_t sum = static_cast<int64_t>(x) + y;
  return static_cast<int32_t>(std::clamp(sum, -limit, limit));
}

size_t TrafficLedger::BeginPhase(const std::string& name, size_t n) {
  phases_.push_back(Phase{name, std::vector<uint64_t>(n, 0),
                          std::vector<uint64_t>(n, 0),
                          std::vector<uint64_t>(n, 0)});
  return phases_.size() - 1;
}

void TrafficLedger::RecordInput(size_t phase, size_t worker, uint64_t bits) {
  phases_.at(phase).input_bits.at(worker) += bits;
}

void TrafficLedger::RecordTransfer(size_t phase, size_t from, size_t to,
                                   uint64_t bits) {
  Phase& p = phases_.at(phase);
  p.sent.at(from) += bits;
  p.received.at(to) += bits;
}

void TrafficLedger::Append(const TrafficLedger& other) {
  phases_.insert(phases_.end(), other.phases_.begin(), other.phases_.end());
}

const TrafficLedger::Phase* TrafficLedger::Find(const std::string& name) const {
  for (const Phase& p : phases_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

uint64_t TrafficLedger::TotalSent() const {
  uint64_t total = 0;
  for (const Phase& p : phases_) {
    for (uint64_t b : p.sent) total += b;
  }
  return total;
}

uint64_t TrafficLedger::TotalReceived() const {
  uint64_t total = 0;
  for (const Phase& p : phases_) {
    for (uint64_t b : p.received) total += b;
  }
  return total;
}

uint64_t TrafficLedger::MaxWorkerEgress() const {
  std::vector<uint64_t> per_worker;
  for (const Phase& p : phases_) {
    if (per_worker.size() < p.sent.size()) per_worker.resize(p.sent.size());
    for (size_t w = 0; w < p.sent.size(); ++w) per_worker[w] += p.sent[w];
  }
  uint64_t best = 0;
  for (uint64_t b : per_worker) best = std::max(best, b);
  return best;
}

uint64_t TrafficLedger::InputBits() const {
  uint64_t total = 0;
  for (const Phase& p : phases_) {
    uint64_t best = 0;
    for (uint64_t b : p.input_bits) best = std::max(best, b);
    total += best;
  }
  return total;
}

double TrafficLedger::BitsPerCoordinate(size_t d) const {
  return static_cast<double>(InputBits()) / static_cast<double>(d);
}

void TrafficLedger::WriteCsv(std::ostream& out) const {
  out << "phase,worker,bits_sent,bits_received\n";
  for (const Phase& p : phases_) {
    for (size_t w = 0; w < p.sent.size(); ++w) {
      out << p.name << ',' << w << ',' << p.sent[w] << ',' << p.received[w]
          << '\n';
    }
  }
}

std::vector<std::vector<float>> RingAllReduce(
    std::span<const std::vector<float>> inputs, const FloatReduceOp& op,
    const WorkerGroup& group, TrafficLedger& ledger, const std::string& phase,
    std::optional<unsigned> element_bits) {
  if (const auto* sum = std::get_if<FloatSum>(&op)) {
    const unsigned bits = element_bits.value_or(BitsOf(sum->wire));
    if (sum->wire == WirePrecision::kFp16) {
      return RingAllReduceImpl<float>(
          inputs, 0.0f, [](float acc, float own) { return acc + own; },
          [](float x) { return core::Fp16RoundTrip(x); }, bits, group, ledger,
          phase);
    }
    return RingAllReduceImpl<float>(
        inputs, 0.0f, [](float acc, float own) { return acc + own; },
        [](float x) { return x; }, bits, group, ledger, phase);
  }
  const unsigned bits = element_bits.value_or(32);
  if (std::holds_alternative<ElemMin>(op)) {
    return RingAllReduceImpl<float>(
        inputs, std::numeric_limits<float>::infinity(),
        [](float acc, float own) { return std::min(acc, own); },
        [](float x) { return x; }, bits, group, ledger, phase);
  }
  return RingAllReduceImpl<float>(
      inputs, -std::numeric_limits<float>::infinity(),
      [](float acc, float own) { return std::max(acc, own); },
      [](float x) { return x; }, bits, group, ledger, phase);
}

std::vector<std::vector<int32_t>> RingAllReduce(
    std::span<const std::vector<int32_t>> inputs, const SatIntSum& op,
    const WorkerGroup& group, TrafficLedger& ledger, const std::string& phase,
    OverflowStats& stats) {
  const int64_t limit = SatLimit(op.bits);
  for (const auto& buf : inputs) {
    for (int32_t x : buf) {
      if (x > limit || x < -limit) {
        throw InvalidArgument("integer input " + std::to_string(x) +
                              " outside the " + std::to_string(op.bits) +
                              "-bit symmetric range");
      }
    }
  }
  auto combine = [&stats, limit](int32_t acc, int32_t own) {
    const int64_t sum = static_cast<int64_t>(acc) + own;
    ++stats.total_adds;
    if (sum > limit || sum < -limit) {
      ++stats.clip_events;
      return static_cast<int32_t>(std::clamp(sum, -limit, limit));
    }
    return static_cast<int32_t>(sum);
  };
  const size_t len = inputs.empty() ? 0 : inputs[0].size();
  const size_t n = group.size();
  auto result = RingAllReduceImpl<int32_t>(
      inputs, 0, combine, [](int32_t x) { return x; }, op.bits, group, ledger,
      phase);
  // Padding elements are combined too; they never clip and are not counted.
  const size_t padded = (len + n - 1) / n * n;
  stats.total_adds -= static_cast<uint64_t>(padded - len) * (n - 1);
  return result;
}

void RecordRingAllGather(std::span<const uint64_t> payload_bits,
                         const WorkerGroup& group, TrafficLedger& ledger,
                         const std::string& phase) {
  CheckInputs(payload_bits.size(), group);
  const size_t n = group.size();
  const size_t phase_id = ledger.BeginPhase(phase, n);
  for (size_t w = 0; w < n; ++w) {
    ledger.RecordInput(phase_id, w, payload_bits[w]);
  }
  for (size_t s = 0; s + 1 < n; ++s) {
    for (size_t w = 0; w < n; ++w) {
      const size_t origin = (w + n - s) % n;
      ledger.RecordTransfer(phase_id, w, group.next(w), payload_bits[origin]);
    }
  }
}

}  // namespace gradcomp::collectives
