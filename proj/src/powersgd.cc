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

#include "gradcomp/powersgd.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "gradcomp/error.h"

namespace gradcomp::compress {
namespace {

constexpr double kRankTolerance = 1e-6;

void ProjectOut(std::vector<double>& v,
                const std::vector<std::vector<double>>& basis) {
  for (const auto& q : basis) {
    double dot = 0.0;
    for (size_t i = 0; i < v.size(); ++i) dot += q[i] * v[i];
    for (size_t i = 0; i < v.size(); ++i) v[i] -= dot * q[i];
  }
}

double Norm(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace

Matrix::Matrix(size_t rows, size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw InvalidArgument("matrix data size does not match its shape");
  }
}

double Matrix::FrobeniusNorm() const {
  double acc = 0.0;
  for (float x : data_) acc += static_cast<double>(x) * x;
  return std::sqrt(acc);
}

Matrix MatMul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw InvalidArgument("matmul shape mismatch");
  Matrix out(a.rows(), b.cols());
  std::vector<double> row(b.cols());
  for (size_t i = 0; i < a.rows(); ++i) {
    std::fill(row.begin(), row.end(), 0.0);
    for (size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (size_t j = 0; j < b.cols(); ++j) row[j] += aik * b(k, j);
    }
    for (size_t j = 0; j < b.cols(); ++j) out(i, j) = static_cast<float>(row[j]);
  }
  return out;
}

Matrix MatTransposeMul(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw InvalidArgument("matmul shape mismatch");
  std::vector<double> acc(a.cols() * b.cols(), 0.0);
  for (size_t k = 0; k < a.rows(); ++k) {
    for (size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      for (size_t j = 0; j < b.cols(); ++j) acc[i * b.cols() + j] += aki * b(k, j);
    }
  }
  Matrix out(a.cols(), b.cols());
  for (size_t i = 0; i < acc.size(); ++i) out.data()[i] = static_cast<float>(acc[i]);
  return out;
}

Matrix MatMulTranspose(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw InvalidArgument("matmul shape mismatch");
  Matrix out(a.rows(), b.rows());
  for (size_t i = 0; i < a.rows(); ++i) {
    for (size_t j = 0; j < b.rows(); ++j) {
      double acc = 0.0;
      for (size_t k = 0; k < a.cols(); ++k) {
        acc += static_cast<double>(a(i, k)) * b(j, k);
      }
      out(i, j) = static_cast<float>(acc);
    }
  }
  return out;
}

Matrix Subtract(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument("matrix shape mismatch");
  }
  Matrix out(a.rows(), a.cols());
  for (size_t i = 0; i < out.data().size(); ++i) {
    out.data()[i] = a.data()[i] - b.data()[i];
  }
  return out;
}

Matrix RandomGaussian(size_t rows, size_t cols, core::Rng& rng) {
  Matrix out(rows, cols);
  for (float& x : out.data()) x = static_cast<float>(rng.Normal());
  return out;
}

size_t Orthogonalize(Matrix& m) {
  const size_t rows = m.rows();
  const size_t cols = m.cols();
  if (cols > rows) {
    throw InvalidArgument("cannot orthogonalize " + std::to_string(cols) +
                          " columns in dimension " + std::to_string(rows));
  }
  std::vector<std::vector<double>> basis;
  basis.reserve(cols);
  double scale = 0.0;
  for (size_t j = 0; j < cols; ++j) {
    double acc = 0.0;
    for (size_t i = 0; i < rows; ++i) acc += static_cast<double>(m(i, j)) * m(i, j);
    scale = std::max(scale, std::sqrt(acc));
  }

  size_t replaced = 0;
  for (size_t j = 0; j < cols; ++j) {
    std::vector<double> v(rows);
    for (size_t i = 0; i < rows; ++i) v[i] = m(i, j);
    ProjectOut(v, basis);
    ProjectOut(v, basis);
    double norm = Norm(v);
    if (scale == 0.0 || norm <= kRankTolerance * scale) {
      // Complete the basis with the coordinate direction least covered so
      // far: its residual norm^2 is 1 - sum_k q_k[i]^2.
      size_t best = 0;
      double best_cover = 2.0;
      for (size_t i = 0; i < rows; ++i) {
        double cover = 0.0;
        for (const auto& q : basis) cover += q[i] * q[i];
        if (cover < best_cover) {
          best_cover = cover;
          best = i;
        }
      }
      std::fill(v.begin(), v.end(), 0.0);
      v[best] = 1.0;
      ProjectOut(v, basis);
      ProjectOut(v, basis);
      norm = Norm(v);
      ++replaced;
    }
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  for (size_t j = 0; j < cols; ++j) {
    for (size_t i = 0; i < rows; ++i) m(i, j) = static_cast<float>(basis[j][i]);
  }
  return replaced;
}

bool HasFullColumnRank(const Matrix& m) {
  if (m.cols() > m.rows()) return false;
  Matrix copy = m;
  return Orthogonalize(copy) == 0;
}

Matrix EnsureFullColumnRank(Matrix q, const std::function<Matrix()>& redraw) {
  if (HasFullColumnRank(q)) return q;
  for (int attempt = 0; attempt < 3; ++attempt) {
    q = redraw();
    if (HasFullColumnRank(q)) return q;
  }
  throw NumericError(
      "degenerate input: right factor is rank-deficient after 3 re-draws");
}

MatrixShape MostSquareShape(size_t size) {
  if (size == 0) throw InvalidArgument("cannot reshape an empty tensor");
  size_t rows = static_cast<size_t>(std::sqrt(static_cast<double>(size)));
  while (rows * rows > size) --rows;
  while ((rows + 1) * (rows + 1) <= size) ++rows;
  return MatrixShape{rows, (size + rows - 1) / rows};
}

LowRankPayload PowerSgdCompress(const Matrix& m, const Matrix& q) {
  if (q.rows() != m.cols()) throw InvalidArgument("factor shape mismatch");
  if (q.cols() > std::min(m.rows(), m.cols())) {
    throw InvalidArgument("rank exceeds min(rows, cols)");
  }
  Matrix p = MatMul(m, q);
  Orthogonalize(p);
  Matrix q_new = MatTransposeMul(m, p);
  LowRankPayload out;
  out.rows = static_cast<uint32_t>(m.rows());
  out.cols = static_cast<uint32_t>(m.cols());
  out.rank = static_cast<uint32_t>(q.cols());
  out.p.assign(p.data().begin(), p.data().end());
  out.q.assign(q_new.data().begin(), q_new.data().end());
  return out;
}

Matrix PowerSgdDecompress(const LowRankPayload& payload) {
  const Matrix p(payload.rows, payload.rank, payload.p);
  const Matrix q(payload.cols, payload.rank, payload.q);
  return MatMulTranspose(p, q);
}

Matrix DrawSharedFactor(const core::SeedSpec& seeds, uint64_t tensor_id,
                        uint64_t round, unsigned attempt, size_t cols,
                        size_t rank) {
  const uint64_t base = seeds.Derive(core::StreamTag::kPowerSgdInit, round);
  core::Rng rng(core::Mix64(base ^ core::Mix64(tensor_id * 8 + attempt)));
  return RandomGaussian(cols, rank, rng);
}

PowerSgdCompressor::PowerSgdCompressor(PowerSgdConfig config,
                                       core::SeedSpec seeds,
                                       uint64_t tensor_id)
    : config_(config), seeds_(seeds), tensor_id_(tensor_id) {}

Matrix PowerSgdCompressor::DrawFactor(size_t cols, uint64_t round,
                                      unsigned attempt) const {
  return DrawSharedFactor(seeds_, tensor_id_, round, attempt, cols,
                          config_.rank);
}

LowRankPayload PowerSgdCompressor::Compress(const Matrix& m, uint64_t round) {
  if (config_.rank > std::min(m.rows(), m.cols())) {
    throw InvalidArgument("PowerSGD rank exceeds min(rows, cols)");
  }
  const bool reuse = config_.warm_start && warm_q_.rows() == m.cols() &&
                     warm_q_.cols() == config_.rank;
  unsigned attempt = 0;
  Matrix q = EnsureFullColumnRank(
      reuse ? warm_q_ : DrawFactor(m.cols(), round, attempt++),
      [&] { return DrawFactor(m.cols(), round, attempt++); });
  LowRankPayload payload = PowerSgdCompress(m, q);
  if (config_.warm_start) {
    warm_q_ = Matrix(payload.cols, payload.rank, payload.q);
  }
  return payload;
}

}  // namespace gradcomp::compress
