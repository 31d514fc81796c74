// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "socketrain/model.hpp"
#include "socketrain/synthetic.hpp"
#include "testing_util.hpp"

using namespace socketrain;
using socketrain::testing::bitwise_equal;
using socketrain::testing::random_matrix;

namespace {

FeatureDataset toy_separable() {
  // Two well-separated classes along the first feature.
  FeatureDataset data;
  data.n = 8;
  data.d = 2;
  data.c = 2;
  data.features = Matrix(8, 2);
  data.labels.resize(8);
  for (int i = 0; i < 8; ++i) {
    const int label = i % 2;
    data.features(i, 0) = label == 0 ? -2.0f - 0.1f * i : 2.0f + 0.1f * i;
    data.features(i, 1) = 0.25f * i;
    data.labels[i] = label;
  }
  return data;
}

std::vector<EpochRecord> history_with_accuracies(const std::vector<float>& accs) {
  std::vector<EpochRecord> history;
  for (std::size_t i = 0; i < accs.size(); ++i) {
    EpochRecord r;
    r.epoch = static_cast<int>(i) + 1;
    r.val_accuracy = accs[i];
    history.push_back(r);
  }
  return history;
}

}  // namespace

TEST_CASE("init_head is deterministic, zero-bias, and bounded") {
  const ClassifierHead a = init_head(4, 2, 7);
  const ClassifierHead b = init_head(4, 2, 7);
  CHECK(bitwise_equal(a.weights, b.weights));
  CHECK(a.bias == b.bias);

  const ClassifierHead big = init_head(2048, 8, 123);
  const float limit = std::sqrt(6.0f / 2056.0f);
  for (float w : big.weights.data) {
    CHECK(std::abs(w) < limit);
  }
  for (float v : big.bias) CHECK(v == 0.0f);
  for (float v : big.w_velocity.data) CHECK(v == 0.0f);
  for (float v : big.b_velocity) CHECK(v == 0.0f);

  const ClassifierHead other = init_head(4, 2, 8);
  CHECK_FALSE(bitwise_equal(a.weights, other.weights));
}

TEST_CASE("evaluate: zero head predicts class 0 everywhere") {
  FeatureDataset data = toy_separable();
  ClassifierHead zero;
  zero.weights = Matrix(2, 2);
  zero.bias.assign(2, 0.0f);
  const float acc = evaluate(zero, data);
  // Half the labels are 0, and argmax ties resolve to class 0.
  CHECK(acc == 0.5f);
}

TEST_CASE("evaluate: oracle weights separate the toy set perfectly") {
  FeatureDataset data = toy_separable();
  ClassifierHead oracle;
  oracle.weights = Matrix(2, 2);
  oracle.weights(0, 0) = -1.0f;  // class 0 likes negative x0
  oracle.weights(0, 1) = 1.0f;
  oracle.bias.assign(2, 0.0f);
  CHECK(evaluate(oracle, data) == 1.0f);
}

TEST_CASE("evaluate is invariant under exact power-of-two logit rescaling") {
  std::mt19937 gen(15);
  FeatureDataset data;
  data.n = 32;
  data.d = 6;
  data.c = 4;
  data.features = random_matrix(32, 6, gen);
  data.labels.resize(32);
  for (int& label : data.labels) label = static_cast<int>(gen() % 4);

  ClassifierHead head = init_head(6, 4, 3);
  const float base = evaluate(head, data);
  for (const float scale : {2.0f, 4.0f, 0.5f, 0.25f}) {
    ClassifierHead scaled = head;
    for (float& w : scaled.weights.data) w *= scale;
    for (float& b : scaled.bias) b *= scale;
    CHECK(evaluate(scaled, data) == base);
  }
}

TEST_CASE("evaluate rejects mismatched shapes") {
  FeatureDataset data = toy_separable();
  ClassifierHead wrong = init_head(3, 2, 0);
  CHECK_THROWS_AS(evaluate(wrong, data), std::invalid_argument);
}

TEST_CASE("train_epoch with lr=0 leaves the head untouched") {
  FeatureDataset data = toy_separable();
  TrainConfig cfg;
  cfg.batch_size = 4;
  ClassifierHead head = init_head(2, 2, 1);
  const ClassifierHead before = head;
  Rng rng(9);
  train_epoch(head, data, cfg, 0.0f, rng);
  CHECK(bitwise_equal(head.weights, before.weights));
  CHECK(head.bias == before.bias);
}

TEST_CASE("one sample, one step, zero momentum matches the hand-computed update") {
  FeatureDataset data;
  data.n = 1;
  data.d = 3;
  data.c = 2;
  data.features = Matrix(1, 3);
  data.features.data = {0.5f, -1.0f, 2.0f};
  data.labels = {1};

  TrainConfig cfg;
  cfg.batch_size = 1;
  cfg.momentum = 0.0f;
  ClassifierHead head = init_head(3, 2, 4);
  const ClassifierHead before = head;

  const float lr = 0.1f;
  Rng rng(0);
  train_epoch(head, data, cfg, lr, rng);

  // Expected: w' = w - lr * x^T (softmax - onehot), bias' = b - lr * (softmax - onehot).
  Matrix logits(1, 2);
  for (int j = 0; j < 2; ++j) {
    float acc = before.bias[j];
    for (int k = 0; k < 3; ++k) acc += before.weights(k, j) * data.features(0, k);
    logits(0, j) = acc;
  }
  const SoftmaxXentResult sx = softmax_xent(logits, data.labels);
  for (int k = 0; k < 3; ++k) {
    for (int j = 0; j < 2; ++j) {
      const float grad = data.features(0, k) * sx.dlogits(0, j);
      CHECK(head.weights(k, j) == before.weights(k, j) - lr * grad);
    }
  }
  for (int j = 0; j < 2; ++j) {
    CHECK(head.bias[j] == before.bias[j] - lr * sx.dlogits(0, j));
  }
}

TEST_CASE("training loss decreases on linearly separable data") {
  FeatureDataset data = toy_separable();
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.momentum = 0.0f;
  ClassifierHead head = init_head(2, 2, 2);
  Rng rng(5);
  std::vector<float> losses;
  for (int epoch = 0; epoch < 5; ++epoch) {
    losses.push_back(train_epoch(head, data, cfg, 0.5f, rng));
  }
  for (std::size_t i = 1; i < losses.size(); ++i) {
    CHECK(losses[i] < losses[i - 1]);
  }
}

TEST_CASE("train_epoch aborts with a diagnostic when the loss goes non-finite") {
  FeatureDataset data = toy_separable();
  TrainConfig cfg;
  cfg.batch_size = 8;
  // A head already blown up by a bad run: logits overflow to +Inf for every
  // class, so the stable softmax yields NaN.
  ClassifierHead head = init_head(2, 2, 6);
  for (float& w : head.weights.data) w = 3.0e38f / 2.0f;
  Rng rng(1);
  CHECK_THROWS_WITH_AS(train_epoch(head, data, cfg, 0.001f, rng), doctest::Contains("diverged"),
                       std::runtime_error);
}

TEST_CASE("early_stop follows the patience rule") {
  // Best at epoch 33, no improvement through 43, patience 10 -> stop.
  std::vector<float> accs;
  for (int e = 1; e <= 43; ++e) {
    accs.push_back(e <= 33 ? 0.5f + 0.01f * e : 0.80f);
  }
  auto history = history_with_accuracies(accs);
  CHECK(early_stop(history, 10) == StopDecision::kStop);
  history.pop_back();  // through epoch 42 only: age 9 < 10
  CHECK(early_stop(history, 10) == StopDecision::kContinue);

  // Monotone improvement never stops.
  std::vector<float> rising;
  for (int e = 1; e <= 60; ++e) rising.push_back(0.01f * e);
  CHECK(early_stop(history_with_accuracies(rising), 10) == StopDecision::kContinue);

  // Ties do not reset the counter: [.5, .6, .6 x10 more] stops at record 12.
  std::vector<float> flat = {0.5f, 0.6f};
  for (int i = 0; i < 10; ++i) flat.push_back(0.6f);
  for (std::size_t n = 1; n <= flat.size(); ++n) {
    const std::vector<float> prefix(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(n));
    const auto decision = early_stop(history_with_accuracies(prefix), 10);
    if (n < 12) {
      CHECK(decision == StopDecision::kContinue);
    } else {
      CHECK(decision == StopDecision::kStop);
    }
  }

  CHECK_THROWS_AS(early_stop({}, 10), std::invalid_argument);
}

TEST_CASE("train: epoch cap, determinism, and the patience contract") {
  SyntheticSpec spec;
  spec.n_train = 96;
  spec.n_val = 48;
  spec.d = 8;
  spec.c = 3;
  spec.class_separation = 1.2f;
  spec.noise_sigma = 1.0f;
  spec.seed = 21;
  const auto [train_data, val_data] = generate_synthetic(spec);

  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.base_lr = 0.05f;
  cfg.max_epochs = 1;
  const LrSchedule schedule = [&](int) { return cfg.base_lr; };

  const TrainResult single = train(train_data, val_data, cfg, schedule);
  CHECK(single.history.size() == 1);

  cfg.max_epochs = 120;
  cfg.patience = 5;
  const TrainResult a = train(train_data, val_data, cfg, schedule);
  const TrainResult b = train(train_data, val_data, cfg, schedule);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].val_accuracy == b.history[i].val_accuracy);
    CHECK(a.history[i].lr == b.history[i].lr);
  }
  CHECK(bitwise_equal(a.head.weights, b.head.weights));
  CHECK(a.head.bias == b.head.bias);

  // Terminated by patience (not the cap): the stop epoch trails the best
  // epoch by exactly `patience`.
  REQUIRE(a.history.size() < static_cast<std::size_t>(cfg.max_epochs));
  std::size_t best = 0;
  for (std::size_t i = 1; i < a.history.size(); ++i) {
    if (a.history[i].val_accuracy > a.history[best].val_accuracy) best = i;
  }
  CHECK(a.history.back().epoch - a.history[best].epoch == cfg.patience);

  // The returned head is the best-validation snapshot.
  CHECK(evaluate(a.head, val_data) == a.history[best].val_accuracy);
}

TEST_CASE("train returns one record per epoch with increasing epoch numbers") {
  FeatureDataset data = toy_separable();
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_epochs = 7;
  cfg.patience = 100;
  const TrainResult result = train(data, data, cfg, [](int) { return 0.1f; });
  REQUIRE(result.history.size() == 7);
  for (int i = 0; i < 7; ++i) CHECK(result.history[i].epoch == i + 1);
}

TEST_CASE("metrics stream lines carry the exact keys in order") {
  EpochRecord record;
  record.epoch = 3;
  record.train_loss = 2.5f;
  record.val_accuracy = 0.25f;
  record.lr = 0.5f;
  record.wall_ms = 12.5;
  CHECK(metrics_json_line(record) ==
        R"({"epoch":3,"train_loss":2.5,"val_acc":0.25,"lr":0.5,"wall_ms":12.5})");

  const auto parsed = nlohmann::json::parse(metrics_json_line(record));
  CHECK(parsed.at("epoch") == 3);
  CHECK(parsed.at("val_acc") == 0.25);
}

TEST_CASE("head gradients match double-precision finite differences") {
  std::mt19937 gen(77);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 2 + static_cast<int>(gen() % 7);
    const int c = 2 + static_cast<int>(gen() % 3);
    const int batch = 1 + static_cast<int>(gen() % 8);
    const Matrix x = random_matrix(batch, d, gen);
    std::vector<int> labels(batch);
    for (int& label : labels) label = static_cast<int>(gen() % c);
    ClassifierHead head = init_head(d, c, gen());

    // Implementation-path gradient.
    Matrix logits = matmul(x, head.weights, PrecisionMode::kFp32, 1);
    for (int i = 0; i < batch; ++i) {
      for (int j = 0; j < c; ++j) logits(i, j) += head.bias[j];
    }
    const SoftmaxXentResult sx = softmax_xent(logits, labels);
    const Matrix w_grad = matmul(transpose(x), sx.dlogits, PrecisionMode::kFp32, 1);

    // Double-precision loss for the oracle.
    const auto loss_at = [&](const Matrix& weights, const std::vector<float>& bias) {
      double total = 0.0;
      for (int i = 0; i < batch; ++i) {
        std::vector<double> row(c);
        for (int j = 0; j < c; ++j) {
          double acc = bias[j];
          for (int k = 0; k < d; ++k) acc += double(weights(k, j)) * double(x(i, k));
          row[j] = acc;
        }
        double row_max = row[0];
        for (int j = 1; j < c; ++j) row_max = std::max(row_max, row[j]);
        double denom = 0.0;
        for (int j = 0; j < c; ++j) denom += std::exp(row[j] - row_max);
        total += std::log(denom) - (row[labels[i]] - row_max);
      }
      return total / batch;
    };

    const double h = 1e-3;
    for (int k = 0; k < d; ++k) {
      for (int j = 0; j < c; ++j) {
        Matrix up = head.weights, down = head.weights;
        up(k, j) += static_cast<float>(h);
        down(k, j) -= static_cast<float>(h);
        const double fd = (loss_at(up, head.bias) - loss_at(down, head.bias)) / (2 * h);
        CHECK(std::abs(w_grad(k, j) - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}
