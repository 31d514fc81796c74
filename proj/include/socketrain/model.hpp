// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "socketrain/dataset.hpp"
#include "socketrain/numerics.hpp"
#include "socketrain/rng.hpp"

namespace socketrain {

/// Trainable softmax head over frozen features. Weights are FP32 masters
/// regardless of the compute precision; velocity buffers implement momentum
/// SGD.
struct ClassifierHead {
  Matrix weights;                 // d x c
  std::vector<float> bias;        // c
  Matrix w_velocity;              // d x c
  std::vector<float> b_velocity;  // c
};

struct TrainConfig {
  float base_lr = 0.001f;
  float momentum = 0.9f;
  int batch_size = 32;
  int max_epochs = 200;
  int patience = 10;
  PrecisionMode precision = PrecisionMode::kFp32;
  std::uint64_t seed = 0;
  int intra_op_threads = 1;
};

struct EpochRecord {
  int epoch = 0;  // 1-based, strictly increasing within a run
  float train_loss = 0.0f;
  float val_accuracy = 0.0f;
  float lr = 0.0f;
  double wall_ms = 0.0;
};

enum class StopDecision { kContinue, kStop };

/// Glorot-uniform weights in (-sqrt(6/(d+c)), +sqrt(6/(d+c))), zero bias and
/// velocity, deterministic by seed.
ClassifierHead init_head(int d, int c, std::uint64_t seed);

/// Fraction of samples whose argmax logit equals the label; argmax ties go
/// to the lowest class index.
float evaluate(const ClassifierHead& head, const FeatureDataset& data, int threads = 1);

/// One pass over the data: shuffled minibatches, forward in cfg.precision,
/// softmax cross-entropy, momentum SGD on the FP32 masters
/// (v <- momentum*v - lr*g; w <- w + v). Returns the sample-weighted mean
/// train loss. Throws on a non-finite loss (divergence).
float train_epoch(ClassifierHead& head, const FeatureDataset& data, const TrainConfig& cfg,
                  float lr, Rng& shuffle_rng);

/// Stop iff the best val_accuracy happened >= patience epochs before the
/// latest record. Strict improvement resets the counter; ties do not.
StopDecision early_stop(const std::vector<EpochRecord>& history, int patience);

/// Per-epoch synchronization point (the distributed layer's entry). Receives
/// the local stop proposal and may mutate the head (parameter averaging);
/// returns the authoritative stop decision for this worker.
using SyncHook = std::function<bool(int epoch, bool local_stop, ClassifierHead& head)>;

using EpochCallback = std::function<void(const EpochRecord&)>;
using LrSchedule = std::function<float(int epoch)>;

struct TrainResult {
  ClassifierHead head;
  std::vector<EpochRecord> history;
};

/// Full training loop: train_epoch + evaluate per epoch, early stopping with
/// cfg.patience, lr from the schedule. Without a hook the best-validation
/// head is restored on return and the run is fully deterministic given
/// cfg.seed. With a hook the final (hook-managed) parameters are returned:
/// averaging makes local best snapshots meaningless across workers.
TrainResult train(const FeatureDataset& train_data, const FeatureDataset& val_data,
                  const TrainConfig& cfg, const LrSchedule& lr_schedule,
                  const SyncHook& sync_hook = {}, const EpochCallback& on_epoch = {});

/// One metrics-stream line: {"epoch":..,"train_loss":..,"val_acc":..,
/// "lr":..,"wall_ms":..} with exactly those keys.
std::string metrics_json_line(const EpochRecord& record);

/// Parameter vector (weights row-major, then bias) for averaging and its
/// inverse. install_params leaves velocity buffers untouched.
std::vector<float> flatten_params(const ClassifierHead& head);
void install_params(const std::vector<float>& flat, ClassifierHead& head);

}  // namespace socketrain
