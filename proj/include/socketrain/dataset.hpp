// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "socketrain/numerics.hpp"

namespace socketrain {

/// Frozen-backbone feature vectors with integer class labels.
struct FeatureDataset {
  int n = 0;  // sample count
  int d = 0;  // feature dimension
  int c = 0;  // class count
  Matrix features;          // n x d
  std::vector<int> labels;  // length n, each in [0, c)
};

/// Throws std::invalid_argument when the invariants do not hold
/// (n >= 1, shapes consistent, labels in range).
void validate_dataset(const FeatureDataset& data);

// FDS1 binary format (all fields little-endian):
//   magic "FDS1" | u32 version=1 | u32 N | u32 D | u32 C
//   N*D float32 features, row-major | N u32 labels
void save_dataset(const FeatureDataset& data, const std::string& path);
FeatureDataset load_dataset(const std::string& path);

}  // namespace socketrain
