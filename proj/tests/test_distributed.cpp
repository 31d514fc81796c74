// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <future>
#include <random>
#include <thread>

#include "socketrain/distributed.hpp"
#include "socketrain/synthetic.hpp"
#include "socketrain/transport.hpp"
#include "testing_util.hpp"

using namespace socketrain;
using socketrain::testing::bitwise_equal;

namespace {

FeatureDataset numbered_dataset(int n, int d, int c) {
  FeatureDataset data;
  data.n = n;
  data.d = d;
  data.c = c;
  data.features = Matrix(n, d);
  data.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    data.labels[i] = i % c;
    for (int j = 0; j < d; ++j) data.features(i, j) = static_cast<float>(i * d + j);
  }
  return data;
}

DistConfig config_for(int p, int rank, const std::string& addr) {
  DistConfig cfg;
  cfg.num_workers = p;
  cfg.worker_id = rank;
  cfg.rendezvous_addr = addr;
  cfg.timeout_ms = 20000;
  return cfg;
}

// Run one callable per rank on its own thread; rethrows the first failure.
template <typename Fn>
std::vector<std::vector<float>> run_ring(int p, Fn&& body) {
  const std::string addr = "127.0.0.1:" + std::to_string(pick_free_port());
  std::vector<std::future<std::vector<float>>> futures;
  for (int rank = 0; rank < p; ++rank) {
    futures.push_back(std::async(std::launch::async, [&, rank] {
      RingGroup group = rendezvous(config_for(p, rank, addr));
      std::vector<float> out = body(rank, group);
      group.barrier_decide(1, true);  // release the coordinator's service loop
      group.shutdown();
      return out;
    }));
  }
  std::vector<std::vector<float>> results;
  for (auto& f : futures) results.push_back(f.get());
  return results;
}

// Sequential ascending-rank oracle: left fold of the workers' vectors in
// rank order, then divide by p.
std::vector<float> allreduce_oracle(const std::vector<std::vector<float>>& inputs) {
  std::vector<float> acc = inputs[0];
  for (std::size_t r = 1; r < inputs.size(); ++r) {
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += inputs[r][j];
  }
  for (float& v : acc) v /= static_cast<float>(inputs.size());
  return acc;
}

}  // namespace

TEST_CASE("shard: halves, identity, remainder spreading") {
  const FeatureDataset data = numbered_dataset(4000, 2, 4);
  const FeatureDataset a = shard(data, 2, 0);
  const FeatureDataset b = shard(data, 2, 1);
  CHECK(a.n == 2000);
  CHECK(b.n == 2000);
  CHECK(a.features(0, 0) == 0.0f);
  CHECK(b.features(0, 0) == data.features(2000, 0));

  const FeatureDataset all = shard(numbered_dataset(10, 1, 2), 1, 0);
  CHECK(all.n == 10);

  const FeatureDataset small = numbered_dataset(10, 1, 2);
  CHECK(shard(small, 3, 0).n == 4);
  CHECK(shard(small, 3, 1).n == 3);
  CHECK(shard(small, 3, 2).n == 3);

  CHECK_THROWS_AS(shard(small, 11, 0), std::invalid_argument);
  CHECK_THROWS_AS(shard(small, 2, 2), std::invalid_argument);
}

TEST_CASE("shard disjointness and coverage over random sizes") {
  std::mt19937 gen(13);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + static_cast<int>(gen() % 200);
    const FeatureDataset data = numbered_dataset(n, 1, 3);
    const int p = 1 + static_cast<int>(gen() % std::min(n, 7));
    std::vector<float> seen;
    int min_size = n, max_size = 0;
    for (int k = 0; k < p; ++k) {
      const FeatureDataset piece = shard(data, p, k);
      min_size = std::min(min_size, piece.n);
      max_size = std::max(max_size, piece.n);
      for (int i = 0; i < piece.n; ++i) seen.push_back(piece.features(i, 0));
    }
    CHECK(max_size - min_size <= 1);
    REQUIRE(seen.size() == static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) CHECK(seen[i] == static_cast<float>(i));  // order-preserving cover
  }
}

TEST_CASE("effective_lr: paper schedule and properties") {
  DistConfig cfg;
  cfg.num_workers = 2;
  cfg.base_lr = 0.001f;
  cfg.warmup_epochs = 3;

  CHECK(effective_lr(3, cfg) == 0.002f);
  CHECK(effective_lr(4, cfg) == 0.002f);
  CHECK(effective_lr(100, cfg) == 0.002f);
  CHECK(effective_lr(1, cfg) ==
        doctest::Approx(0.001f + 0.001f * (1.0f / 3.0f)).epsilon(1e-6));

  DistConfig no_warmup = cfg;
  no_warmup.warmup_epochs = 0;
  CHECK(effective_lr(1, no_warmup) == 0.002f);

  // Non-decreasing, constant after warmup.
  float prev = 0.0f;
  for (int e = 1; e <= 20; ++e) {
    const float lr = effective_lr(e, cfg);
    CHECK(lr >= prev);
    if (e > cfg.warmup_epochs) CHECK(lr == 0.002f);
    prev = lr;
  }

  CHECK_THROWS_AS(effective_lr(0, cfg), std::invalid_argument);
}

TEST_CASE("should_average matches the every-k rule") {
  CHECK(should_average(5, 5));
  CHECK_FALSE(should_average(3, 5));
  CHECK(should_average(10, 5));
  for (int e = 1; e <= 6; ++e) CHECK(should_average(e, 1));
  CHECK_THROWS_AS(should_average(1, 0), std::invalid_argument);
  CHECK_THROWS_AS(should_average(0, 3), std::invalid_argument);
}

TEST_CASE("rendezvous: loopback rings of size 1 and 2") {
  {
    const std::string addr = "127.0.0.1:" + std::to_string(pick_free_port());
    RingGroup group = rendezvous(config_for(1, 0, addr));
    CHECK(group.established());
    CHECK(group.size() == 1);
    CHECK(group.barrier_decide(1, true));  // p=1: own decision comes straight back
    group.shutdown();
  }
  {
    const std::string addr = "127.0.0.1:" + std::to_string(pick_free_port());
    auto worker = [&](int rank) {
      RingGroup group = rendezvous(config_for(2, rank, addr));
      const bool established = group.established();
      const bool stop = group.barrier_decide(1, rank == 0);  // rank 0 says stop
      group.shutdown();
      return established && stop;
    };
    auto f1 = std::async(std::launch::async, worker, 1);
    auto f0 = std::async(std::launch::async, worker, 0);
    CHECK(f0.get());
    CHECK(f1.get());  // rank 1 proposed continue but follows rank 0's stop
  }
}

TEST_CASE("rendezvous rejects a duplicate worker_id with an error frame") {
  const std::string addr = "127.0.0.1:" + std::to_string(pick_free_port());
  const auto [host, port] = split_host_port(addr);

  // Rank 0 hosts a 2-worker rendezvous; the genuine rank 1 arrives only
  // after an impostor claiming worker_id 0 has been turned away.
  auto rank0 = std::async(std::launch::async, [&] {
    RingGroup group = rendezvous(config_for(2, 0, addr));
    group.barrier_decide(1, true);
    group.shutdown();
  });

  // Let rank 0's own HELLO land first; the impostor must lose that race.
  std::this_thread::sleep_for(std::chrono::milliseconds(250));

  std::string rejection;
  {
    Socket impostor = Socket::connect_to(host, port, 10000);
    impostor.send_frame(make_hello({0, 1}));
    const WireFrame reply = impostor.recv_frame(10000);
    REQUIRE(reply.type == MsgType::kBye);
    rejection = parse_bye(reply);
  }
  CHECK(rejection.find("duplicate worker_id 0") != std::string::npos);

  auto rank1 = std::async(std::launch::async, [&] {
    RingGroup group = rendezvous(config_for(2, 1, addr));
    group.barrier_decide(1, false);
    group.shutdown();
  });
  rank0.get();
  rank1.get();
}

TEST_CASE("rendezvous times out when a worker never arrives") {
  const std::string addr = "127.0.0.1:" + std::to_string(pick_free_port());
  DistConfig cfg = config_for(2, 0, addr);
  cfg.timeout_ms = 300;
  CHECK_THROWS_AS(rendezvous(cfg), std::runtime_error);
}

TEST_CASE("ring_allreduce: spec examples") {
  {
    const std::vector<std::vector<float>> inputs = {{1.0f, 2.0f}, {3.0f, 4.0f}};
    const auto results = run_ring(2, [&](int rank, RingGroup& group) {
      return ring_allreduce(inputs[rank], group);
    });
    for (const auto& r : results) {
      CHECK(r == std::vector<float>{2.0f, 3.0f});
    }
  }
  {
    const auto results = run_ring(1, [&](int, RingGroup& group) {
      return ring_allreduce({5.0f, -1.0f}, group);
    });
    CHECK(results[0] == std::vector<float>{5.0f, -1.0f});
  }
  {
    const std::vector<std::vector<float>> inputs = {{1.0f}, {2.0f}, {6.0f}};
    const auto results = run_ring(3, [&](int rank, RingGroup& group) {
      return ring_allreduce(inputs[rank], group);
    });
    for (const auto& r : results) {
      CHECK(r == std::vector<float>{3.0f});
    }
  }
}

TEST_CASE("ring_allreduce equals the ascending-rank oracle bitwise") {
  std::mt19937 gen(71);
  for (int p = 1; p <= 4; ++p) {
    for (const std::size_t len :
         {std::size_t(1), std::size_t(p), std::size_t(p + 1), std::size_t(1000)}) {
      std::vector<std::vector<float>> inputs(p);
      for (auto& v : inputs) {
        v.resize(len);
        for (float& x : v) {
          x = -3.0f + 6.0f * (static_cast<float>(gen() >> 8) * 0x1.0p-24f);
        }
      }
      const std::vector<float> expected = allreduce_oracle(inputs);
      const auto results = run_ring(p, [&](int rank, RingGroup& group) {
        return ring_allreduce(inputs[rank], group);
      });
      for (const auto& r : results) {
        CHECK(bitwise_equal(r, expected));
      }
    }
  }
}

TEST_CASE("ring_allreduce detects length mismatches via CHUNK counts") {
  const auto attempt = [&] {
    run_ring(2, [&](int rank, RingGroup& group) {
      return ring_allreduce(std::vector<float>(rank == 0 ? 8 : 9, 1.0f), group);
    });
  };
  CHECK_THROWS_AS(attempt(), std::runtime_error);
}

TEST_CASE("distributed_train: p=1 equals single-worker training with the warmup schedule") {
  SyntheticSpec spec;
  spec.n_train = 64;
  spec.n_val = 32;
  spec.d = 6;
  spec.c = 2;
  spec.class_separation = 2.0f;
  spec.noise_sigma = 0.8f;
  spec.seed = 9;
  const auto [train_data, val_data] = generate_synthetic(spec);

  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.max_epochs = 12;
  cfg.patience = 50;
  cfg.seed = 4;

  DistConfig dist;
  dist.num_workers = 1;
  dist.worker_id = 0;
  dist.rendezvous_addr = "127.0.0.1:" + std::to_string(pick_free_port());
  dist.base_lr = 0.02f;
  dist.warmup_epochs = 3;
  dist.timeout_ms = 20000;

  const TrainResult distributed = distributed_train(dist, cfg, train_data, val_data);
  const TrainResult local = train(train_data, val_data, cfg,
                                  [&](int epoch) { return effective_lr(epoch, dist); });

  REQUIRE(distributed.history.size() == local.history.size());
  for (std::size_t i = 0; i < local.history.size(); ++i) {
    CHECK(distributed.history[i].train_loss == local.history[i].train_loss);
    CHECK(distributed.history[i].val_accuracy == local.history[i].val_accuracy);
    CHECK(distributed.history[i].lr == local.history[i].lr);
  }
}

TEST_CASE("distributed_train: 2 workers stay in lockstep and end bitwise-identical") {
  SyntheticSpec spec;
  spec.n_train = 128;
  spec.n_val = 64;
  spec.d = 8;
  spec.c = 3;
  spec.class_separation = 1.8f;
  spec.noise_sigma = 1.0f;
  spec.seed = 31;
  const auto [train_data, val_data] = generate_synthetic(spec);

  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.max_epochs = 60;
  cfg.patience = 6;
  cfg.seed = 2;

  const std::string addr = "127.0.0.1:" + std::to_string(pick_free_port());
  auto worker = [&](int rank) {
    DistConfig dist;
    dist.num_workers = 2;
    dist.worker_id = rank;
    dist.rendezvous_addr = addr;
    dist.averaging_period = 5;
    dist.warmup_epochs = 3;
    dist.base_lr = 0.01f;
    dist.timeout_ms = 30000;
    return distributed_train(dist, cfg, train_data, val_data);
  };
  auto f1 = std::async(std::launch::async, worker, 1);
  auto f0 = std::async(std::launch::async, worker, 0);
  const TrainResult r0 = f0.get();
  const TrainResult r1 = f1.get();

  // Both stopped at the same epoch (rank 0's decision) and, thanks to the
  // final average, hold bitwise-identical parameters.
  CHECK(r0.history.size() == r1.history.size());
  CHECK(bitwise_equal(r0.head.weights, r1.head.weights));
  CHECK(r0.head.bias == r1.head.bias);
}
