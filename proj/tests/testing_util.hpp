// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <unistd.h>

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "socketrain/numerics.hpp"

namespace socketrain::testing {

// Scratch directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

// Independent RNE oracle for BF16 rounding: choose between the two
// neighbouring BF16-representable values by exact distance comparison in
// double, ties to the even low mantissa bit. Deliberately avoids the
// bias-and-truncate trick the implementation uses.
inline float bf16_neighbour_oracle(float x) {
  if (std::isnan(x)) return x;
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(x);
  const std::uint32_t down = bits & 0xFFFF0000u;  // toward zero in magnitude
  if (down == bits) return x;                     // already representable (covers +/-Inf)
  const std::uint32_t up = down + 0x00010000u;    // away from zero, may land on Inf

  const double xd = std::abs(static_cast<double>(x));
  const double down_d = std::abs(static_cast<double>(std::bit_cast<float>(down)));
  // When `up` is the Inf pattern its place on the real line is 2^128 (one
  // magnitude step past the largest finite BF16); overflow-to-Inf follows
  // the same nearest/tie rule against that virtual value.
  const double up_d = (up & 0x7FFFFFFFu) == 0x7F800000u
                          ? std::ldexp(1.0, 128)
                          : std::abs(static_cast<double>(std::bit_cast<float>(up)));
  const double dist_down = xd - down_d;
  const double dist_up = up_d - xd;
  if (dist_down < dist_up) return std::bit_cast<float>(down);
  if (dist_up < dist_down) return std::bit_cast<float>(up);
  return ((down >> 16) & 1u) == 0 ? std::bit_cast<float>(down) : std::bit_cast<float>(up);
}

// Reference product: the naive triple loop, scalar accumulator per element.
inline Matrix matmul_reference(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < b.cols; ++j) {
      float acc = 0.0f;
      for (int k = 0; k < a.cols; ++k) {
        acc += a(i, k) * b(k, j);
      }
      out(i, j) = acc;
    }
  }
  return out;
}

inline bool bitwise_equal(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) return false;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    if (std::bit_cast<std::uint32_t>(a.data[i]) != std::bit_cast<std::uint32_t>(b.data[i])) {
      return false;
    }
  }
  return true;
}

inline bool bitwise_equal(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint32_t>(a[i]) != std::bit_cast<std::uint32_t>(b[i])) return false;
  }
  return true;
}

inline Matrix random_matrix(int rows, int cols, std::mt19937& gen, float lo = -1.0f,
                            float hi = 1.0f) {
  Matrix m(rows, cols);
  for (float& v : m.data) {
    v = lo + (hi - lo) * (static_cast<float>(gen() >> 8) * 0x1.0p-24f);
  }
  return m;
}

}  // namespace socketrain::testing
