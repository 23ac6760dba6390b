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

#ifndef GRADCOMP_POWERSGD_H_
#define GRADCOMP_POWERSGD_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gradcomp/compressors.h"
#include "gradcomp/vectorcore.h"

namespace gradcomp::compress {

// Row-major FP32 matrix. Products accumulate in double.
class Matrix {
 public:
  Matrix() = default;
  Matrix(size_t rows, size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
  Matrix(size_t rows, size_t cols, std::vector<float> data);

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  float& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
  float operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }
  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  double FrobeniusNorm() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<float> data_;
};

Matrix MatMul(const Matrix& a, const Matrix& b);         // A B
Matrix MatTransposeMul(const Matrix& a, const Matrix& b);  // A^T B
Matrix MatMulTranspose(const Matrix& a, const Matrix& b);  // A B^T
Matrix Subtract(const Matrix& a, const Matrix& b);

// Gaussian matrix from `rng`.
Matrix RandomGaussian(size_t rows, size_t cols, core::Rng& rng);

// Modified Gram-Schmidt with a second re-orthogonalization pass, in place.
// A column whose residual falls below 1e-6 of the largest input column norm
// is replaced by the standard basis vector with the largest residual, so the
// result always has orthonormal columns. Returns the number of replaced
// columns.
size_t Orthogonalize(Matrix& m);

// True if the columns of m are numerically independent.
bool HasFullColumnRank(const Matrix& m);

// Returns q if it has full column rank; otherwise asks `redraw` for a
// replacement up to three times and throws NumericError if every draw is
// rank-deficient.
Matrix EnsureFullColumnRank(Matrix q, const std::function<Matrix()>& redraw);

// Most-square m x n with m <= n and m * n >= size.
struct MatrixShape {
  size_t rows = 0;
  size_t cols = 0;
};
MatrixShape MostSquareShape(size_t size);

// One power-iteration step against a given right factor q (n x r):
// P = M Q, P_hat = orth(P), Q_new = M^T P_hat.
LowRankPayload PowerSgdCompress(const Matrix& m, const Matrix& q);
Matrix PowerSgdDecompress(const LowRankPayload& payload);

// Per-worker PowerSGD state for a single matrix: keeps the warm-start factor
// and draws fresh seeded factors when needed.
class PowerSgdCompressor {
 public:
  PowerSgdCompressor(PowerSgdConfig config, core::SeedSpec seeds,
                     uint64_t tensor_id = 0);

  LowRankPayload Compress(const Matrix& m, uint64_t round);

 private:
  Matrix DrawFactor(size_t cols, uint64_t round, unsigned attempt) const;

  PowerSgdConfig config_;
  core::SeedSpec seeds_;
  uint64_t tensor_id_;
  Matrix warm_q_;
};

// Shared right factor for (tensor, round, attempt); identical on all
// workers.
Matrix DrawSharedFactor(const core::SeedSpec& seeds, uint64_t tensor_id,
                        uint64_t round, unsigned attempt, size_t cols,
                        size_t rank);

}  // namespace gradcomp::compress

#endif  // GRADCOMP_POWERSGD_H_
