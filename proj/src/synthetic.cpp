// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#include "socketrain/synthetic.hpp"

#include <cmath>
#include <stdexcept>

#include "socketrain/rng.hpp"

namespace socketrain {

namespace {

// Balanced label list for one split: class k appears n/c (+1 for the first
// n mod c classes) times, then the order is shuffled.
std::vector<int> balanced_labels(int n, int c, Rng& rng) {
  std::vector<int> labels;
  labels.reserve(n);
  const int base = n / c;
  const int remainder = n % c;
  for (int k = 0; k < c; ++k) {
    const int count = base + (k < remainder ? 1 : 0);
    labels.insert(labels.end(), count, k);
  }
  rng.shuffle(labels);
  return labels;
}

FeatureDataset make_split(int n, const Matrix& centers, const SyntheticSpec& spec, Rng& rng) {
  FeatureDataset data;
  data.n = n;
  data.d = spec.d;
  data.c = spec.c;
  data.labels = balanced_labels(n, spec.c, rng);
  data.features = Matrix(n, spec.d);
  for (int i = 0; i < n; ++i) {
    const float* center = &centers.data[static_cast<std::size_t>(data.labels[i]) * spec.d];
    float* row = &data.features.data[static_cast<std::size_t>(i) * spec.d];
    for (int j = 0; j < spec.d; ++j) {
      row[j] = center[j] + spec.noise_sigma * rng.normal();
    }
  }
  return data;
}

}  // namespace

std::pair<FeatureDataset, FeatureDataset> generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_train < 1 || spec.n_val < 1) {
    throw std::invalid_argument("synthetic: split sizes must be >= 1");
  }
  if (spec.n_train + spec.n_val < spec.c) {
    throw std::invalid_argument("synthetic: need at least one sample per class");
  }
  if (spec.d < 1 || spec.c < 1) throw std::invalid_argument("synthetic: d and c must be >= 1");
  if (!(spec.class_separation > 0.0f)) {
    throw std::invalid_argument("synthetic: class_separation must be > 0");
  }
  if (spec.noise_sigma < 0.0f) throw std::invalid_argument("synthetic: noise_sigma must be >= 0");

  Rng rng(spec.seed);

  // Centers: iid normal directions normalized onto the sphere of radius
  // class_separation. In high dimension the directions are near-orthogonal,
  // so pairwise center distance concentrates around separation * sqrt(2).
  Matrix centers(spec.c, spec.d);
  for (int k = 0; k < spec.c; ++k) {
    float* row = &centers.data[static_cast<std::size_t>(k) * spec.d];
    float norm_sq = 0.0f;
    for (int j = 0; j < spec.d; ++j) {
      row[j] = rng.normal();
      norm_sq += row[j] * row[j];
    }
    const float scale = spec.class_separation / std::sqrt(norm_sq);
    for (int j = 0; j < spec.d; ++j) row[j] *= scale;
  }

  FeatureDataset train = make_split(spec.n_train, centers, spec, rng);
  FeatureDataset val = make_split(spec.n_val, centers, spec, rng);
  return {std::move(train), std::move(val)};
}

}  // namespace socketrain
