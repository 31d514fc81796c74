// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace socketrain {

// Deterministic draws on top of std::mt19937. The standard <random>
// distributions are implementation-defined, so every mapping from raw draws
// to values is done here by hand; identical seeds give identical streams on
// any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed)
      : gen_(static_cast<std::uint32_t>(seed ^ (seed >> 32))) {}

  // Uniform in the open interval (0, 1).
  float uniform01() {
    const std::uint32_t top24 = gen_() >> 8;
    return (static_cast<float>(top24) + 0.5f) * 0x1.0p-24f;
  }

  // Uniform in the open interval (lo, hi).
  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n); rejection sampling, no modulo bias.
  std::uint32_t below(std::uint32_t n) {
    const std::uint32_t threshold = (-n) % n;  // 2^32 mod n
    std::uint32_t x;
    do {
      x = gen_();
    } while (x < threshold);
    return x % n;
  }

  // Standard normal via Box-Muller. The polar form would consume a
  // data-dependent number of draws, which makes streams harder to reason
  // about; the trigonometric form uses exactly two per pair.
  float normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const float u1 = uniform01();
    const float u2 = uniform01();
    const float radius = std::sqrt(-2.0f * std::log(u1));
    const float angle = 6.2831853071795864769f * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(static_cast<std::uint32_t>(i))]);
    }
  }

 private:
  std::mt19937 gen_;
  bool have_spare_ = false;
  float spare_ = 0.0f;
};

}  // namespace socketrain
