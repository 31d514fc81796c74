// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <vector>

namespace socketrain {

/// Compute policy for matmul: plain FP32, or operands rounded to
/// BF16-representable values with products accumulated in FP32 (the software
/// analog of auto mixed precision on AMX-class hardware).
enum class PrecisionMode { kFp32, kBf16Mixed };

/// Dense row-major FP32 matrix. Plain storage; all kernels are free
/// functions so the accumulation-order contracts stay visible in one place.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;  // length rows * cols, row-major

  Matrix() = default;
  Matrix(int r, int c)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0f) {}

  float& operator()(int i, int j) {
    return data[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols) + j];
  }
  float operator()(int i, int j) const {
    return data[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols) + j];
  }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

/// Nearest BF16-representable FP32 value (low 16 mantissa bits zero),
/// round-to-nearest-even via the bias-and-truncate trick. NaN passes through
/// with its payload untouched; +/-Inf are preserved; finite values beyond the
/// BF16 range overflow to +/-Inf; subnormals round like any other value (no
/// flush to zero).
inline float round_bf16(float x) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(x);
  if ((bits & 0x7F800000u) == 0x7F800000u && (bits & 0x007FFFFFu) != 0u) {
    return x;  // NaN: the bias would carry into the exponent and make an Inf
  }
  const std::uint32_t rounded = bits + 0x7FFFu + ((bits >> 16) & 1u);
  return std::bit_cast<float>(rounded & 0xFFFF0000u);
}

/// Matrix product a (m x k) * b (k x n). Every output element is a dot
/// product accumulated in ascending index order, so the result is bitwise
/// identical for any thread count; `threads` only spreads independent output
/// rows across std::threads. In kBf16Mixed, both operands pass through
/// round_bf16 element-wise before multiplication (rounding is pure and
/// element-wise, so rounding whole operands up front is arithmetically
/// identical to rounding inside the inner loop) and products accumulate in
/// FP32.
Matrix matmul(const Matrix& a, const Matrix& b, PrecisionMode mode, int threads);

Matrix transpose(const Matrix& m);

struct SoftmaxXentResult {
  float loss = 0.0f;    // mean over the batch of -log softmax(logits)[label]
  Matrix dlogits;       // (softmax - onehot) / batch
};

/// Max-subtraction stable softmax cross-entropy over rows of `logits`
/// (batch x C) against integer labels.
SoftmaxXentResult softmax_xent(const Matrix& logits, const std::vector<int>& labels);

}  // namespace socketrain
