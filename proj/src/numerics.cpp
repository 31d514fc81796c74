// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#include "socketrain/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>

namespace socketrain {

namespace {

// Rows [row_begin, row_end) of out = a * b. k runs ascending per output
// element; j is innermost so b is read row-contiguously with one independent
// accumulator per column (no cross-k reassociation).
void matmul_rows(const Matrix& a, const Matrix& b, Matrix& out, int row_begin, int row_end) {
  const int n = b.cols;
  const int depth = a.cols;
  for (int i = row_begin; i < row_end; ++i) {
    float* dst = &out.data[static_cast<std::size_t>(i) * n];
    for (int k = 0; k < depth; ++k) {
      const float aik = a(i, k);
      const float* brow = &b.data[static_cast<std::size_t>(k) * n];
      for (int j = 0; j < n; ++j) {
        dst[j] += aik * brow[j];
      }
    }
  }
}

Matrix rounded_copy(const Matrix& m) {
  Matrix r = m;
  for (float& v : r.data) v = round_bf16(v);
  return r;
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b, PrecisionMode mode, int threads) {
  if (a.cols != b.rows) {
    throw std::invalid_argument("matmul: shape mismatch (" + std::to_string(a.rows) + "x" +
                                std::to_string(a.cols) + " * " + std::to_string(b.rows) + "x" +
                                std::to_string(b.cols) + ")");
  }
  if (threads < 1) throw std::invalid_argument("matmul: threads must be >= 1");

  if (mode == PrecisionMode::kBf16Mixed) {
    return matmul(rounded_copy(a), rounded_copy(b), PrecisionMode::kFp32, threads);
  }

  Matrix out(a.rows, b.cols);  // zero-initialized
  const int nthreads = std::min(threads, std::max(a.rows, 1));
  if (nthreads <= 1) {
    matmul_rows(a, b, out, 0, a.rows);
    return out;
  }

  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  const int chunk = (a.rows + nthreads - 1) / nthreads;
  for (int t = 0; t < nthreads; ++t) {
    const int begin = t * chunk;
    const int end = std::min(a.rows, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] { matmul_rows(a, b, out, begin, end); });
  }
  for (auto& th : pool) th.join();
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols, m.rows);
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) {
      t(j, i) = m(i, j);
    }
  }
  return t;
}

SoftmaxXentResult softmax_xent(const Matrix& logits, const std::vector<int>& labels) {
  const int batch = logits.rows;
  const int classes = logits.cols;
  if (batch < 1) throw std::invalid_argument("softmax_xent: empty batch");
  if (static_cast<int>(labels.size()) != batch) {
    throw std::invalid_argument("softmax_xent: labels length != batch");
  }
  for (int label : labels) {
    if (label < 0 || label >= classes) {
      throw std::invalid_argument("softmax_xent: label " + std::to_string(label) +
                                  " out of range [0, " + std::to_string(classes) + ")");
    }
  }

  SoftmaxXentResult r;
  r.dlogits = Matrix(batch, classes);
  float loss_sum = 0.0f;
  for (int i = 0; i < batch; ++i) {
    const float* row = &logits.data[static_cast<std::size_t>(i) * classes];
    float* drow = &r.dlogits.data[static_cast<std::size_t>(i) * classes];

    float row_max = row[0];
    for (int j = 1; j < classes; ++j) row_max = std::max(row_max, row[j]);

    float denom = 0.0f;
    for (int j = 0; j < classes; ++j) {
      drow[j] = std::exp(row[j] - row_max);
      denom += drow[j];
    }
    for (int j = 0; j < classes; ++j) {
      const float p = drow[j] / denom;
      drow[j] = (p - (j == labels[i] ? 1.0f : 0.0f)) / static_cast<float>(batch);
    }
    loss_sum += std::log(denom) - (row[labels[i]] - row_max);
  }
  r.loss = loss_sum / static_cast<float>(batch);
  return r;
}

}  // namespace socketrain
