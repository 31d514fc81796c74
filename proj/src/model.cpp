// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#include "socketrain/model.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace socketrain {

namespace {

void check_shapes(const ClassifierHead& head, const FeatureDataset& data) {
  if (head.weights.rows != data.d || head.weights.cols != data.c) {
    throw std::invalid_argument("model: head shape (" + std::to_string(head.weights.rows) + "x" +
                                std::to_string(head.weights.cols) + ") does not match dataset (d=" +
                                std::to_string(data.d) + ", c=" + std::to_string(data.c) + ")");
  }
  if (static_cast<int>(head.bias.size()) != data.c) {
    throw std::invalid_argument("model: bias length does not match class count");
  }
}

// logits = X * W + bias (bias in FP32 regardless of precision mode).
Matrix forward(const ClassifierHead& head, const Matrix& x, PrecisionMode mode, int threads) {
  Matrix logits = matmul(x, head.weights, mode, threads);
  for (int i = 0; i < logits.rows; ++i) {
    for (int j = 0; j < logits.cols; ++j) {
      logits(i, j) += head.bias[j];
    }
  }
  return logits;
}

void validate_config(const TrainConfig& cfg, const FeatureDataset& data) {
  if (cfg.batch_size < 1 || cfg.batch_size > data.n) {
    throw std::invalid_argument("train: batch_size must be in [1, n]");
  }
  if (cfg.patience < 1) throw std::invalid_argument("train: patience must be >= 1");
  if (cfg.max_epochs < 1) throw std::invalid_argument("train: max_epochs must be >= 1");
  if (cfg.momentum < 0.0f || cfg.momentum >= 1.0f) {
    throw std::invalid_argument("train: momentum must be in [0, 1)");
  }
  if (cfg.intra_op_threads < 1) throw std::invalid_argument("train: intra_op_threads must be >= 1");
}

}  // namespace

ClassifierHead init_head(int d, int c, std::uint64_t seed) {
  if (d < 1 || c < 1) throw std::invalid_argument("init_head: d and c must be >= 1");
  ClassifierHead head;
  head.weights = Matrix(d, c);
  head.w_velocity = Matrix(d, c);
  head.bias.assign(c, 0.0f);
  head.b_velocity.assign(c, 0.0f);

  const float limit = std::sqrt(6.0f / static_cast<float>(d + c));
  Rng rng(seed);
  for (float& w : head.weights.data) w = rng.uniform(-limit, limit);
  return head;
}

float evaluate(const ClassifierHead& head, const FeatureDataset& data, int threads) {
  check_shapes(head, data);
  const Matrix logits = forward(head, data.features, PrecisionMode::kFp32, threads);
  int correct = 0;
  for (int i = 0; i < data.n; ++i) {
    const float* row = &logits.data[static_cast<std::size_t>(i) * data.c];
    int argmax = 0;
    for (int j = 1; j < data.c; ++j) {
      if (row[j] > row[argmax]) argmax = j;
    }
    if (argmax == data.labels[i]) ++correct;
  }
  return static_cast<float>(correct) / static_cast<float>(data.n);
}

float train_epoch(ClassifierHead& head, const FeatureDataset& data, const TrainConfig& cfg,
                  float lr, Rng& shuffle_rng) {
  check_shapes(head, data);
  validate_config(cfg, data);
  if (lr < 0.0f) throw std::invalid_argument("train_epoch: lr must be >= 0");

  std::vector<int> order(data.n);
  std::iota(order.begin(), order.end(), 0);
  shuffle_rng.shuffle(order);

  const int threads = cfg.intra_op_threads;
  float loss_sum = 0.0f;
  int batch_index = 0;
  for (int begin = 0; begin < data.n; begin += cfg.batch_size, ++batch_index) {
    const int size = std::min(cfg.batch_size, data.n - begin);

    Matrix x(size, data.d);
    std::vector<int> labels(size);
    for (int i = 0; i < size; ++i) {
      const int src = order[begin + i];
      std::copy_n(&data.features.data[static_cast<std::size_t>(src) * data.d], data.d,
                  &x.data[static_cast<std::size_t>(i) * data.d]);
      labels[i] = data.labels[src];
    }

    const Matrix logits = forward(head, x, cfg.precision, threads);
    const SoftmaxXentResult sx = softmax_xent(logits, labels);
    if (!std::isfinite(sx.loss)) {
      throw std::runtime_error("train_epoch: diverged (non-finite loss " +
                               std::to_string(sx.loss) + " in batch " +
                               std::to_string(batch_index) + ", lr=" + std::to_string(lr) + ")");
    }

    // dlogits already carries the 1/batch factor, so these are mean grads.
    const Matrix w_grad = matmul(transpose(x), sx.dlogits, cfg.precision, threads);
    std::vector<float> b_grad(data.c, 0.0f);
    for (int i = 0; i < size; ++i) {
      for (int j = 0; j < data.c; ++j) {
        b_grad[j] += sx.dlogits(i, j);
      }
    }

    for (std::size_t idx = 0; idx < head.weights.data.size(); ++idx) {
      float& v = head.w_velocity.data[idx];
      v = cfg.momentum * v - lr * w_grad.data[idx];
      head.weights.data[idx] += v;
    }
    for (int j = 0; j < data.c; ++j) {
      float& v = head.b_velocity[j];
      v = cfg.momentum * v - lr * b_grad[j];
      head.bias[j] += v;
    }

    loss_sum += sx.loss * static_cast<float>(size);
  }
  return loss_sum / static_cast<float>(data.n);
}

StopDecision early_stop(const std::vector<EpochRecord>& history, int patience) {
  if (history.empty()) throw std::invalid_argument("early_stop: empty history");
  if (patience < 1) throw std::invalid_argument("early_stop: patience must be >= 1");
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i].val_accuracy > history[best].val_accuracy) best = i;  // ties keep the earliest
  }
  const int age = history.back().epoch - history[best].epoch;
  return age >= patience ? StopDecision::kStop : StopDecision::kContinue;
}

TrainResult train(const FeatureDataset& train_data, const FeatureDataset& val_data,
                  const TrainConfig& cfg, const LrSchedule& lr_schedule, const SyncHook& sync_hook,
                  const EpochCallback& on_epoch) {
  if (train_data.d != val_data.d || train_data.c != val_data.c) {
    throw std::invalid_argument("train: train/val dimensions disagree");
  }
  validate_config(cfg, train_data);
  if (!lr_schedule) throw std::invalid_argument("train: lr schedule is required");

  TrainResult result;
  result.head = init_head(train_data.d, train_data.c, cfg.seed);
  Rng shuffle_rng(cfg.seed + 0x9E3779B9u);  // decouple the shuffle stream from init

  ClassifierHead best_head = result.head;
  float best_accuracy = -1.0f;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const float lr = lr_schedule(epoch);
    const float loss = train_epoch(result.head, train_data, cfg, lr, shuffle_rng);
    const float accuracy = evaluate(result.head, val_data, cfg.intra_op_threads);
    const auto end = std::chrono::steady_clock::now();

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss;
    record.val_accuracy = accuracy;
    record.lr = lr;
    record.wall_ms = std::chrono::duration<double, std::milli>(end - start).count();
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);

    if (accuracy > best_accuracy) {
      best_accuracy = accuracy;
      best_head = result.head;
    }

    bool stop = early_stop(result.history, cfg.patience) == StopDecision::kStop ||
                epoch == cfg.max_epochs;
    if (sync_hook) stop = sync_hook(epoch, stop, result.head);
    if (stop) break;
  }

  if (!sync_hook) result.head = best_head;
  return result;
}

std::string metrics_json_line(const EpochRecord& record) {
  nlohmann::ordered_json line;
  line["epoch"] = record.epoch;
  line["train_loss"] = record.train_loss;
  line["val_acc"] = record.val_accuracy;
  line["lr"] = record.lr;
  line["wall_ms"] = record.wall_ms;
  return line.dump();
}

std::vector<float> flatten_params(const ClassifierHead& head) {
  std::vector<float> flat;
  flat.reserve(head.weights.data.size() + head.bias.size());
  flat.insert(flat.end(), head.weights.data.begin(), head.weights.data.end());
  flat.insert(flat.end(), head.bias.begin(), head.bias.end());
  return flat;
}

void install_params(const std::vector<float>& flat, ClassifierHead& head) {
  const std::size_t w = head.weights.data.size();
  if (flat.size() != w + head.bias.size()) {
    throw std::invalid_argument("install_params: size mismatch");
  }
  std::copy_n(flat.begin(), w, head.weights.data.begin());
  std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(w), head.bias.size(), head.bias.begin());
}

}  // namespace socketrain
