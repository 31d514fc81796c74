// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "socketrain/dataset.hpp"
#include "socketrain/model.hpp"
#include "socketrain/transport.hpp"

namespace socketrain {

struct DistConfig {
  int num_workers = 1;
  int worker_id = 0;
  std::string rendezvous_addr = "127.0.0.1:29500";
  int averaging_period = 5;  // epochs between parameter averages
  int warmup_epochs = 3;
  float base_lr = 0.001f;    // scaled by num_workers after warmup
  int timeout_ms = 60000;
};

void validate_dist_config(const DistConfig& cfg);

/// Contiguous block partition: worker k takes samples
/// [k*floor(n/p) + min(k, n mod p), ...), remainder spread over the first
/// n mod p workers. Shards are disjoint and cover every sample.
FeatureDataset shard(const FeatureDataset& data, int num_workers, int worker_id);

/// Linear warmup from base_lr to base_lr * num_workers over warmup_epochs,
/// constant at the scaled target afterwards. Epochs are 1-based.
float effective_lr(int epoch, const DistConfig& cfg);

/// True iff this 1-based epoch is a parameter-averaging point.
bool should_average(int epoch, int period);

namespace detail {
struct Coordinator;
}

/// Established ring membership. Worker 0 additionally hosts the rendezvous
/// coordinator (on a background thread) that collects HELLOs, distributes
/// the RING peer list, and serves per-epoch BARRIER decisions. Messages flow
/// rank k -> rank (k+1) mod p.
class RingGroup {
 public:
  RingGroup(RingGroup&&) noexcept;
  RingGroup& operator=(RingGroup&&) noexcept;
  RingGroup(const RingGroup&) = delete;
  RingGroup& operator=(const RingGroup&) = delete;
  ~RingGroup();

  int rank() const { return rank_; }
  int size() const { return size_; }
  bool established() const { return established_; }
  int timeout_ms() const { return timeout_ms_; }

  /// Epoch-end synchronization: every rank reports its local stop proposal;
  /// the coordinator answers with rank 0's decision for all.
  bool barrier_decide(int epoch, bool local_stop);

  /// Simultaneous ring exchange: frame out to the successor, one frame in
  /// from the predecessor.
  WireFrame exchange(const WireFrame& out);

  /// Clean BYE + teardown. Called by the destructor if not done explicitly.
  void shutdown();

 private:
  friend RingGroup rendezvous(const DistConfig& cfg);
  RingGroup() = default;

  int rank_ = 0;
  int size_ = 1;
  bool established_ = false;
  int timeout_ms_ = 60000;
  Socket control_;
  Socket pred_;
  Socket succ_;
  std::unique_ptr<detail::Coordinator> coordinator_;  // rank 0 only
};

/// Blocking rendezvous: HELLO to the coordinator at cfg.rendezvous_addr
/// (hosted by worker 0), wait for the RING peer list, dial the successor and
/// accept the predecessor. Throws on duplicate worker ids, timeouts, or
/// unreachable peers.
RingGroup rendezvous(const DistConfig& cfg);

/// Element-wise mean across all workers. Reduce-scatter then allgather over
/// p near-equal segments in 2(p-1) rounds; every segment is summed in
/// ascending-rank order, so all workers return bitwise-identical vectors
/// equal to the sequential sum-then-divide oracle. All workers must call
/// with equal-length vectors.
std::vector<float> ring_allreduce(const std::vector<float>& local, RingGroup& group);

/// One worker's role in the data-parallel job: trains on its shard with the
/// warmup-scaled LR schedule, averages parameters (weights and bias) every
/// cfg.averaging_period epochs and once at termination, and follows rank 0's
/// early-stop decision. Worker k trains with train_cfg.seed + k.
TrainResult distributed_train(const DistConfig& cfg, const TrainConfig& train_cfg,
                              const FeatureDataset& full_train, const FeatureDataset& val,
                              const EpochCallback& on_epoch = {});

}  // namespace socketrain
