// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#include "socketrain/distributed.hpp"

#include <algorithm>
#include <exception>
#include <stdexcept>
#include <thread>
#include <utility>

namespace socketrain {

void validate_dist_config(const DistConfig& cfg) {
  if (cfg.num_workers < 1) throw std::invalid_argument("dist: num_workers must be >= 1");
  if (cfg.worker_id < 0 || cfg.worker_id >= cfg.num_workers) {
    throw std::invalid_argument("dist: worker_id must be in [0, num_workers)");
  }
  if (cfg.averaging_period < 1) throw std::invalid_argument("dist: averaging_period must be >= 1");
  if (cfg.warmup_epochs < 0) throw std::invalid_argument("dist: warmup_epochs must be >= 0");
  if (cfg.timeout_ms < 1) throw std::invalid_argument("dist: timeout_ms must be >= 1");
}

namespace {

// Near-equal split of `total` into `parts`: the first (total mod parts)
// parts get one extra element. Shared by dataset sharding and allreduce
// segmentation so both sides of the wire agree on segment sizes.
std::pair<std::size_t, std::size_t> block_range(std::size_t total, int parts, int index) {
  const std::size_t base = total / static_cast<std::size_t>(parts);
  const std::size_t remainder = total % static_cast<std::size_t>(parts);
  const std::size_t extra = std::min<std::size_t>(index, remainder);
  const std::size_t begin = static_cast<std::size_t>(index) * base + extra;
  const std::size_t size = base + (static_cast<std::size_t>(index) < remainder ? 1 : 0);
  return {begin, size};
}

}  // namespace

FeatureDataset shard(const FeatureDataset& data, int num_workers, int worker_id) {
  validate_dataset(data);
  if (num_workers < 1) throw std::invalid_argument("shard: num_workers must be >= 1");
  if (worker_id < 0 || worker_id >= num_workers) {
    throw std::invalid_argument("shard: worker_id must be in [0, num_workers)");
  }
  if (num_workers > data.n) {
    throw std::invalid_argument("shard: more workers (" + std::to_string(num_workers) +
                                ") than samples (" + std::to_string(data.n) + ")");
  }

  const auto [begin, size] = block_range(static_cast<std::size_t>(data.n), num_workers, worker_id);
  FeatureDataset out;
  out.n = static_cast<int>(size);
  out.d = data.d;
  out.c = data.c;
  out.features = Matrix(out.n, out.d);
  std::copy_n(&data.features.data[begin * data.d], size * static_cast<std::size_t>(data.d),
              out.features.data.begin());
  out.labels.assign(data.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                    data.labels.begin() + static_cast<std::ptrdiff_t>(begin + size));
  return out;
}

float effective_lr(int epoch, const DistConfig& cfg) {
  validate_dist_config(cfg);
  if (epoch < 1) throw std::invalid_argument("effective_lr: epoch is 1-based");
  const float target = cfg.base_lr * static_cast<float>(cfg.num_workers);
  if (epoch > cfg.warmup_epochs || cfg.warmup_epochs == 0) return target;
  const float fraction = static_cast<float>(epoch) / static_cast<float>(cfg.warmup_epochs);
  return cfg.base_lr + (target - cfg.base_lr) * fraction;
}

bool should_average(int epoch, int period) {
  if (period < 1) throw std::invalid_argument("should_average: period must be >= 1");
  if (epoch < 1) throw std::invalid_argument("should_average: epoch is 1-based");
  return epoch % period == 0;
}

namespace detail {

// Rank 0's rendezvous + barrier service. Runs on its own thread for the
// lifetime of the job; any protocol error tears down every connection,
// which the workers observe as peer disconnects.
struct Coordinator {
  int num_workers;
  int timeout_ms;
  Listener listener;
  std::thread worker;
  std::exception_ptr failure;

  Coordinator(int p, Listener l, int timeout)
      : num_workers(p), timeout_ms(timeout), listener(std::move(l)) {}

  void start() {
    worker = std::thread([this] {
      try {
        run();
      } catch (...) {
        failure = std::current_exception();
      }
    });
  }

  void join() {
    if (worker.joinable()) worker.join();
  }

  ~Coordinator() { join(); }

  void run() {
    std::vector<Socket> by_rank(num_workers);
    std::vector<std::string> addrs(num_workers);
    std::vector<bool> seen(num_workers, false);

    int arrived = 0;
    while (arrived < num_workers) {
      Socket conn = listener.accept(timeout_ms);
      WireFrame frame = conn.recv_frame(timeout_ms);
      if (frame.type != MsgType::kHello) {
        conn.send_frame(make_bye("rendezvous: expected HELLO"));
        continue;
      }
      const HelloPayload hello = parse_hello(frame);
      if (hello.worker_id >= static_cast<std::uint32_t>(num_workers)) {
        conn.send_frame(make_bye("rendezvous: worker_id " + std::to_string(hello.worker_id) +
                                 " out of range for " + std::to_string(num_workers) + " workers"));
        continue;
      }
      if (seen[hello.worker_id]) {
        conn.send_frame(make_bye("rendezvous: duplicate worker_id " +
                                 std::to_string(hello.worker_id)));
        continue;
      }
      seen[hello.worker_id] = true;
      addrs[hello.worker_id] = conn.peer_ip() + ":" + std::to_string(hello.ring_port);
      by_rank[hello.worker_id] = std::move(conn);
      ++arrived;
    }
    listener.close();

    const WireFrame ring = make_ring({static_cast<std::uint32_t>(num_workers), addrs});
    for (Socket& conn : by_rank) conn.send_frame(ring);

    // Barrier service: one BARRIER in from every rank, rank 0's stop flag
    // back out to every rank. After a stop decision each worker signs off
    // with BYE.
    for (;;) {
      const BarrierPayload lead = parse_barrier(by_rank[0].recv_frame(timeout_ms));
      for (int k = 1; k < num_workers; ++k) {
        const BarrierPayload b = parse_barrier(by_rank[k].recv_frame(timeout_ms));
        if (b.epoch != lead.epoch) {
          throw std::runtime_error("barrier: workers out of lockstep (epoch " +
                                   std::to_string(b.epoch) + " vs " + std::to_string(lead.epoch) +
                                   ")");
        }
      }
      const WireFrame reply = make_barrier(lead);
      for (Socket& conn : by_rank) conn.send_frame(reply);
      if (lead.stop) break;
    }
    for (Socket& conn : by_rank) {
      const WireFrame frame = conn.recv_frame(timeout_ms);
      if (frame.type != MsgType::kBye) throw std::runtime_error("shutdown: expected BYE");
    }
  }
};

}  // namespace detail

RingGroup::RingGroup(RingGroup&&) noexcept = default;
RingGroup& RingGroup::operator=(RingGroup&&) noexcept = default;

RingGroup::~RingGroup() {
  try {
    shutdown();
  } catch (...) {
    // Destructor teardown is best-effort; a failed job already surfaced
    // its error through the training path.
  }
}

void RingGroup::shutdown() {
  if (!established_) return;
  established_ = false;
  control_.send_frame(make_bye());
  control_.close();
  pred_.close();
  succ_.close();
  if (coordinator_) {
    coordinator_->join();
    if (coordinator_->failure) std::rethrow_exception(coordinator_->failure);
  }
}

bool RingGroup::barrier_decide(int epoch, bool local_stop) {
  if (!established_) throw std::runtime_error("barrier: ring not established");
  control_.send_frame(make_barrier({static_cast<std::uint32_t>(epoch), local_stop}));
  const BarrierPayload reply = parse_barrier(control_.recv_frame(timeout_ms_));
  if (reply.epoch != static_cast<std::uint32_t>(epoch)) {
    throw std::runtime_error("barrier: reply for wrong epoch");
  }
  return reply.stop;
}

WireFrame RingGroup::exchange(const WireFrame& out) {
  if (size_ < 2) throw std::runtime_error("exchange: no peers in a 1-worker ring");
  // Send concurrently with the receive: both ring neighbours send first, so
  // a blocking send could deadlock once frames outgrow socket buffers.
  std::exception_ptr send_failure;
  std::thread sender([&] {
    try {
      succ_.send_frame(out);
    } catch (...) {
      send_failure = std::current_exception();
    }
  });
  WireFrame in;
  std::exception_ptr recv_failure;
  try {
    in = pred_.recv_frame(timeout_ms_);
  } catch (...) {
    recv_failure = std::current_exception();
  }
  sender.join();
  if (recv_failure) std::rethrow_exception(recv_failure);
  if (send_failure) std::rethrow_exception(send_failure);
  return in;
}

RingGroup rendezvous(const DistConfig& cfg) {
  validate_dist_config(cfg);
  const auto [host, port] = split_host_port(cfg.rendezvous_addr);

  RingGroup group;
  group.rank_ = cfg.worker_id;
  group.size_ = cfg.num_workers;
  group.timeout_ms_ = cfg.timeout_ms;

  if (cfg.worker_id == 0) {
    Listener listener = Listener::bind_to(host == "localhost" ? "127.0.0.1" : host, port);
    group.coordinator_ =
        std::make_unique<detail::Coordinator>(cfg.num_workers, std::move(listener), cfg.timeout_ms);
    group.coordinator_->start();
  }

  // Ring listener first: the successor may dial as soon as the coordinator
  // publishes the RING list.
  Listener ring_listener = Listener::bind_to("0.0.0.0", 0);

  group.control_ = Socket::connect_to(host, port, cfg.timeout_ms);
  group.control_.send_frame(make_hello(
      {static_cast<std::uint32_t>(cfg.worker_id), ring_listener.port()}));
  const WireFrame reply = group.control_.recv_frame(cfg.timeout_ms);
  if (reply.type == MsgType::kBye) {
    throw std::runtime_error("rendezvous rejected: " + parse_bye(reply));
  }
  const RingPayload ring = parse_ring(reply);
  if (ring.num_workers != static_cast<std::uint32_t>(cfg.num_workers)) {
    throw std::runtime_error("rendezvous: coordinator reports different worker count");
  }

  if (cfg.num_workers > 1) {
    const int successor = (cfg.worker_id + 1) % cfg.num_workers;
    const auto [peer_host, peer_port] = split_host_port(ring.peer_addrs[successor]);
    group.succ_ = Socket::connect_to(peer_host, peer_port, cfg.timeout_ms);
    group.pred_ = ring_listener.accept(cfg.timeout_ms);
  }
  ring_listener.close();

  group.established_ = true;
  return group;
}

std::vector<float> ring_allreduce(const std::vector<float>& local, RingGroup& group) {
  if (!group.established()) throw std::runtime_error("allreduce: ring not established");
  const int p = group.size();
  const int rank = group.rank();
  if (p == 1) return local;

  const std::size_t n = local.size();
  const auto segment_of = [&](int index) { return block_range(n, p, index); };
  const auto own_slice = [&](int segment) {
    const auto [begin, size] = segment_of(segment);
    return std::vector<float>(local.begin() + static_cast<std::ptrdiff_t>(begin),
                              local.begin() + static_cast<std::ptrdiff_t>(begin + size));
  };

  // Reduce-scatter, p-1 rounds. A sum carried around the ring would
  // accumulate each segment in cyclic order starting at its start rank, so
  // instead frames carry the raw contributions (in visit order) and the
  // final owner folds them in ascending-rank order. Frame f for segment s
  // at round t holds (t+1) slices from ranks s, s+1, ..., s+t (mod p),
  // concatenated; the receiver splits by the known segment length.
  int current_segment = rank;
  std::vector<float> carried = own_slice(rank);
  for (int t = 0; t + 1 < p; ++t) {
    const int incoming_segment = ((rank - t - 1) % p + p) % p;
    const std::size_t incoming_len = segment_of(incoming_segment).second;

    const WireFrame in = group.exchange(make_chunk(
        {static_cast<std::uint16_t>(t), static_cast<std::uint32_t>(current_segment), carried}));
    const ChunkPayload chunk = parse_chunk(in);
    if (chunk.round != t || chunk.segment_index != static_cast<std::uint32_t>(incoming_segment)) {
      throw std::runtime_error("allreduce: unexpected chunk (round " + std::to_string(chunk.round) +
                               ", segment " + std::to_string(chunk.segment_index) + ")");
    }
    if (chunk.values.size() != incoming_len * static_cast<std::size_t>(t + 1)) {
      throw std::runtime_error("allreduce: length mismatch (got " +
                               std::to_string(chunk.values.size()) + " values, want " +
                               std::to_string(incoming_len * (t + 1)) + ")");
    }

    carried = chunk.values;
    const std::vector<float> own = own_slice(incoming_segment);
    carried.insert(carried.end(), own.begin(), own.end());
    current_segment = incoming_segment;
  }

  // current_segment == (rank+1) mod p and `carried` holds all p slices in
  // visit order: ranks current_segment, current_segment+1, ... (mod p).
  // Fold ascending by rank, then divide by p.
  const auto [owned_begin, owned_len] = segment_of(current_segment);
  std::vector<float> result(local);
  float* owned = result.data() + owned_begin;
  {
    const auto slice_for_rank = [&](int q) {
      const int position = ((q - current_segment) % p + p) % p;
      return carried.data() + static_cast<std::size_t>(position) * owned_len;
    };
    const float* first = slice_for_rank(0);
    std::copy_n(first, owned_len, owned);
    for (int q = 1; q < p; ++q) {
      const float* slice = slice_for_rank(q);
      for (std::size_t j = 0; j < owned_len; ++j) owned[j] += slice[j];
    }
    for (std::size_t j = 0; j < owned_len; ++j) owned[j] /= static_cast<float>(p);
  }

  // Allgather, p-1 rounds: forward reduced segments verbatim, so every
  // worker ends with the owners' bytes.
  int send_segment = current_segment;
  for (int u = 0; u + 1 < p; ++u) {
    const int round = (p - 1) + u;
    const int incoming_segment = ((rank - u) % p + p) % p;
    const auto [in_begin, in_len] = segment_of(incoming_segment);
    const auto [out_begin, out_len] = segment_of(send_segment);

    std::vector<float> payload(result.begin() + static_cast<std::ptrdiff_t>(out_begin),
                               result.begin() + static_cast<std::ptrdiff_t>(out_begin + out_len));
    const WireFrame in = group.exchange(make_chunk(
        {static_cast<std::uint16_t>(round), static_cast<std::uint32_t>(send_segment), payload}));
    const ChunkPayload chunk = parse_chunk(in);
    if (chunk.round != round || chunk.segment_index != static_cast<std::uint32_t>(incoming_segment)) {
      throw std::runtime_error("allreduce: unexpected chunk in allgather");
    }
    if (chunk.values.size() != in_len) {
      throw std::runtime_error("allreduce: length mismatch in allgather");
    }
    std::copy(chunk.values.begin(), chunk.values.end(),
              result.begin() + static_cast<std::ptrdiff_t>(in_begin));
    send_segment = incoming_segment;
  }

  return result;
}

TrainResult distributed_train(const DistConfig& cfg, const TrainConfig& train_cfg,
                              const FeatureDataset& full_train, const FeatureDataset& val,
                              const EpochCallback& on_epoch) {
  validate_dist_config(cfg);
  FeatureDataset local = shard(full_train, cfg.num_workers, cfg.worker_id);

  TrainConfig worker_cfg = train_cfg;
  worker_cfg.seed = train_cfg.seed + static_cast<std::uint64_t>(cfg.worker_id);
  worker_cfg.batch_size = std::min(worker_cfg.batch_size, local.n);  // weak scaling keeps it as-is

  RingGroup group = rendezvous(cfg);

  const LrSchedule schedule = [cfg](int epoch) { return effective_lr(epoch, cfg); };
  const SyncHook hook = [&](int epoch, bool local_stop, ClassifierHead& head) {
    const bool stop = group.barrier_decide(epoch, local_stop);
    if (should_average(epoch, cfg.averaging_period) || stop) {
      install_params(ring_allreduce(flatten_params(head), group), head);
    }
    return stop;
  };

  TrainResult result = train(local, val, worker_cfg, schedule, hook, on_epoch);
  group.shutdown();
  return result;
}

}  // namespace socketrain
