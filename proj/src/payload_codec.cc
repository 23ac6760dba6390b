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

// Binary payload layout. All integers and floats are little-endian; vectors
// carry a u32 element count unless their length is implied.
//
//   tag u8: 0 Sparse, 1 ChunkSet, 2 Quant, 3 LowRank, 4 Dense
//   Sparse:   u32 K, K x u32 index, K x u16 fp16 value
//   ChunkSet: u32 chunk_size, u32 J, J x u32 chunk id, u32 V, V x u16 value
//   Quant:    u8 q, u32 block_size, u64 rotation_id, u32 N, N x i8 code,
//             u32 B, B x (f32 lo, f32 hi)
//   LowRank:  u32 rows, u32 cols, u32 rank, rows*rank x f32 P,
//             cols*rank x f32 Q
//   Dense:    u8 precision, u32 N, N x (u16 fp16 | f32)

#include <bit>
#include <cstring>

#include "gradcomp/compressors.h"
#include "gradcomp/error.h"

namespace gradcomp::compress {
namespace {

class Writer {
 public:
  template <typename T>
  void Put(T value) {
    using U = std::conditional_t<sizeof(T) == 1, uint8_t,
              std::conditional_t<sizeof(T) == 2, uint16_t,
              std::conditional_t<sizeof(T) == 4, uint32_t, uint64_t>>>;
    U bits = std::bit_cast<U>(value);
    for (size_t i = 0; i < sizeof(T); ++i) {
      bytes_.push_back(static_cast<uint8_t>(bits >> (8 * i)));
    }
  }
  template <typename T>
  void PutAll(const std::vector<T>& values) {
    for (const T& v : values) Put(v);
  }
  void PutCount(size_t n) { Put(static_cast<uint32_t>(n)); }

  std::vector<uint8_t> Take() { return std::move(bytes_); }

 private:
  std::vector<uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T Get() {
    using U = std::conditional_t<sizeof(T) == 1, uint8_t,
              std::conditional_t<sizeof(T) == 2, uint16_t,
              std::conditional_t<sizeof(T) == 4, uint32_t, uint64_t>>>;
    if (pos_ + sizeof(T) > bytes_.size()) {
      throw InvalidArgument("truncated payload");
    }
    U bits = 0;
    for (size_t i = 0; i < sizeof(T); ++i) {
      bits |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(T);
    return std::bit_cast<T>(bits);
  }
  template <typename T>
  std::vector<T> GetN(size_t n) {
    if (n > (bytes_.size() - pos_) / sizeof(T)) {
      throw InvalidArgument("truncated payload");
    }
    std::vector<T> out(n);
    for (T& v : out) v = Get<T>();
    return out;
  }
  size_t GetCount() { return Get<uint32_t>(); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
};

}  // namespace

std::vector<uint8_t> EncodePayload(const CompressedPayload& payload) {
  Writer w;
  w.Put(static_cast<uint8_t>(payload.index()));
  std::visit(
      [&w](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SparsePayload>) {
          w.PutCount(p.indices.size());
          w.PutAll(p.indices);
          w.PutAll(p.values);
        } else if constexpr (std::is_same_v<T, ChunkSetPayload>) {
          w.Put(p.chunk_size);
          w.PutCount(p.chunk_ids.size());
          w.PutAll(p.chunk_ids);
          w.PutCount(p.values.size());
          w.PutAll(p.values);
        } else if constexpr (std::is_same_v<T, QuantPayload>) {
          w.Put(p.q);
          w.Put(p.block_size);
          w.Put(p.rotation_id);
          w.PutCount(p.codes.size());
          w.PutAll(p.codes);
          w.PutCount(p.ranges.size());
          for (const QuantRange& r : p.ranges) {
            w.Put(r.lo);
            w.Put(r.hi);
          }
        } else if constexpr (std::is_same_v<T, LowRankPayload>) {
          w.Put(p.rows);
          w.Put(p.cols);
          w.Put(p.rank);
          w.PutAll(p.p);
          w.PutAll(p.q);
        } else {
          w.Put(p.precision);
          w.PutCount(p.values.size());
          for (float v : p.values) {
            if (p.precision == 16) {
              w.Put(core::FloatToHalfBits(v));
            } else {
              w.Put(v);
            }
          }
        }
      },
      payload);
  return w.Take();
}

CompressedPayload DecodePayload(std::span<const uint8_t> bytes) {
  Reader r(bytes);
  const uint8_t tag = r.Get<uint8_t>();
  CompressedPayload out;
  switch (tag) {
    case 0: {
      SparsePayload p;
      const size_t k = r.GetCount();
      p.indices = r.GetN<uint32_t>(k);
      p.values = r.GetN<uint16_t>(k);
      out = std::move(p);
      break;
    }
    case 1: {
      ChunkSetPayload p;
      p.chunk_size = r.Get<uint32_t>();
      p.chunk_ids = r.GetN<uint32_t>(r.GetCount());
      p.values = r.GetN<uint16_t>(r.GetCount());
      out = std::move(p);
      break;
    }
    case 2: {
      QuantPayload p;
      p.q = r.Get<uint8_t>();
      p.block_size = r.Get<uint32_t>();
      p.rotation_id = r.Get<uint64_t>();
      p.codes = r.GetN<int8_t>(r.GetCount());
      const size_t blocks = r.GetCount();
      const auto flat = r.GetN<float>(2 * static_cast<uint64_t>(blocks));
      for (size_t i = 0; i < blocks; ++i) {
        p.ranges.push_back(QuantRange{flat[2 * i], flat[2 * i + 1]});
      }
      out = std::move(p);
      break;
    }
    case 3: {
      LowRankPayload p;
      p.rows = r.Get<uint32_t>();
      p.cols = r.Get<uint32_t>();
      p.rank = r.Get<uint32_t>();
      p.p = r.GetN<float>(static_cast<size_t>(p.rows) * p.rank);
      p.q = r.GetN<float>(static_cast<size_t>(p.cols) * p.rank);
      out = std::move(p);
      break;
    }
    case 4: {
      DensePayload p;
      p.precision = r.Get<uint8_t>();
      if (p.precision != 16 && p.precision != 32) {
        throw InvalidArgument("dense payload precision must be 16 or 32");
      }
      const size_t n = r.GetCount();
      if (p.precision == 16) {
        for (uint16_t h : r.GetN<uint16_t>(n)) {
          p.values.push_back(core::HalfBitsToFloat(h));
        }
      } else {
        p.values = r.GetN<float>(n);
      }
      out = std::move(p);
      break;
    }
    default:
      throw InvalidArgument("unknown payload tag " + std::to_string(tag));
  }
  if (!r.done()) throw InvalidArgument("trailing bytes after payload");
  return out;
}

}  // namespace gradcomp::compress
