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

#ifndef GRADCOMP_COLLECTIVES_H_
#define GRADCOMP_COLLECTIVES_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace gradcomp::collectives {

// n logical workers arranged in the ring 0 -> 1 -> ... -> n-1 -> 0.
class WorkerGroup {
 public:
  explicit WorkerGroup(size_t n);
  size_t size() const { return n_; }
  size_t next(size_t w) const { return (w + 1) % n_; }

 private:
  size_t n_;
};

enum class WirePrecision { kFp32, kFp16 };

inline unsigned BitsOf(WirePrecision p) {
  return p == WirePrecision::kFp16 ? 16 : 32;
}

// Float addition. With kFp16 wire precision every transmitted partial sum is
// rounded to half precision; accumulation itself stays in FP32.
struct FloatSum {
  WirePrecision wire = WirePrecision::kFp32;
};
// Saturating integer addition in the symmetric range +-(2^(bits-1) - 1).
struct SatIntSum {
  unsigned bits = 8;
};
struct ElemMin {};
struct ElemMax {};

using FloatReduceOp = std::variant<FloatSum, ElemMin, ElemMax>;

// Sat(x, y) = min(2^(b-1) - 1, max(-2^(b-1) + 1, x + y)).
int32_t Sat(int32_t x, int32_t y, unsigned bits);
int32_t SatLimit(unsigned bits);

// Clip counters for saturating reductions. code_sigma is an optional
// diagnostic filled in by the quantizing pipeline.
struct OverflowStats {
  uint64_t clip_events = 0;
  uint64_t total_adds = 0;
  double code_sigma = 0.0;

  void Merge(const OverflowStats& other) {
    clip_events += other.clip_events;
    total_adds += other.total_adds;
  }
};

// Bits moved through simulated collectives, per phase and per worker.
class TrafficLedger {
 public:
  struct Phase {
    std::string name;
    // Collective input size contributed by each worker, in bits.
    std::vector<uint64_t> input_bits;
    std::vector<uint64_t> sent;
    std::vector<uint64_t> received;
  };

  // Opens a phase for n workers and returns its index.
  size_t BeginPhase(const std::string& name, size_t n);
  void RecordInput(size_t phase, size_t worker, uint64_t bits);
  void RecordTransfer(size_t phase, size_t from, size_t to, uint64_t bits);
  void Append(const TrafficLedger& other);

  const std::vector<Phase>& phases() const { return phases_; }
  const Phase* Find(const std::string& name) const;

  uint64_t TotalSent() const;
  uint64_t TotalReceived() const;
  // Largest per-worker egress summed over all phases.
  uint64_t MaxWorkerEgress() const;
  // Sum over phases of the largest per-worker collective input.
  uint64_t InputBits() const;
  // Communication cost b: collective input bits per gradient coordinate.
  double BitsPerCoordinate(size_t d) const;

  // CSV rows: phase,worker,bits_sent,bits_received (with header).
  void WriteCsv(std::ostream& out) const;

 private:
  std::vector<Phase> phases_;
};

// Ring all-reduce over equal-length FP32 buffers. Buffers are padded to a
// multiple of n with the operator's neutral element, reduce-scattered for
// n-1 steps (block b is accumulated in ring order starting at worker b) and
// all-gathered for n-1 steps. Returns every worker's final buffer, trimmed
// to the input length. `element_bits` overrides the wire width charged to
// the ledger (used for fault injection).
std::vector<std::vector<float>> RingAllReduce(
    std::span<const std::vector<float>> inputs, const FloatReduceOp& op,
    const WorkerGroup& group, TrafficLedger& ledger, const std::string& phase,
    std::optional<unsigned> element_bits = std::nullopt);

// Saturating integer ring all-reduce. Inputs must lie in the symmetric
// b-bit range; clip events are added to `stats`.
std::vector<std::vector<int32_t>> RingAllReduce(
    std::span<const std::vector<int32_t>> inputs, const SatIntSum& op,
    const WorkerGroup& group, TrafficLedger& ledger, const std::string& phase,
    OverflowStats& stats);

// Ring all-gather traffic: at step s worker w forwards the payload of worker
// (w - s) mod n, so worker w sends every payload except its successor's.
void RecordRingAllGather(std::span<const uint64_t> payload_bits,
                         const WorkerGroup& group, TrafficLedger& ledger,
                         const std::string& phase);

// Every worker ends with all n payloads in worker order. Only the single
// shared result is returned.
template <typename Payload, typename BitsFn>
std::vector<Payload> AllGather(std::span<const Payload> inputs,
                               BitsFn&& payload_bits, const WorkerGroup& group,
                               TrafficLedger& ledger,
                               const std::string& phase) {
  std::vector<uint64_t> bits;
  bits.reserve(inputs.size());
  for (const Payload& p : inputs) bits.push_back(payload_bits(p));
  RecordRingAllGather(bits, group, ledger, phase);
  return std::vector<Payload>(inputs.begin(), inputs.end());
}

}  // namespace gradcomp::collectives

#endif  // GRADCOMP_COLLECTIVES_H_
