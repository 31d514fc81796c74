// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#include "socketrain/bench.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "socketrain/subprocess.hpp"
#include "socketrain/transport.hpp"

namespace socketrain {

namespace {

namespace fs = std::filesystem;

std::string precision_name(PrecisionMode mode) {
  return mode == PrecisionMode::kBf16Mixed ? "bf16" : "fp32";
}

std::vector<std::string> worker_argv(const std::string& exe, const BenchConfig& config, int rank,
                                     const std::string& rendezvous, const fs::path& train_path,
                                     const fs::path& val_path, const fs::path& metrics_path) {
  std::vector<std::string> argv = {
      exe,
      "train",
      "--data", train_path.string(),
      "--val", val_path.string(),
      "--precision", precision_name(config.train.precision),
      "--base-lr", std::to_string(config.train.base_lr),
      "--momentum", std::to_string(config.train.momentum),
      "--batch-size", std::to_string(config.train.batch_size),
      "--patience", std::to_string(config.train.patience),
      "--max-epochs", std::to_string(config.train.max_epochs),
      "--seed", std::to_string(config.train.seed),
      "--threads", std::to_string(config.train.intra_op_threads),
      "--metrics", metrics_path.string(),
  };
  if (config.workers > 1) {
    argv.insert(argv.end(), {
        "--workers", std::to_string(config.workers),
        "--worker-id", std::to_string(rank),
        "--rendezvous", rendezvous,
        "--avg-period", std::to_string(config.dist.averaging_period),
        "--warmup", std::to_string(config.dist.warmup_epochs),
        "--timeout-ms", std::to_string(config.dist.timeout_ms),
    });
  }
  return argv;
}

BenchRow summarize_metrics(const fs::path& metrics_path, const BenchConfig& config,
                           double wall_ms) {
  std::ifstream in(metrics_path);
  if (!in) {
    throw std::runtime_error("bench: missing metrics file " + metrics_path.string());
  }
  BenchRow row;
  row.workers = config.workers;
  row.seed = config.train.seed;
  row.total_wall_ms = wall_ms;
  row.best_val_acc = -1.0f;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] != '{') continue;
    const nlohmann::json record = nlohmann::json::parse(line);
    row.epochs_to_stop = std::max(row.epochs_to_stop, record.at("epoch").get<int>());
    row.best_val_acc = std::max(row.best_val_acc, record.at("val_acc").get<float>());
  }
  if (row.epochs_to_stop == 0) {
    throw std::runtime_error("bench: empty metrics stream in " + metrics_path.string());
  }
  return row;
}

}  // namespace

BenchReport run_benchmark(const std::vector<BenchConfig>& configs, const SyntheticSpec& spec,
                          const std::string& exe, const std::string& work_dir) {
  if (configs.empty()) throw std::invalid_argument("bench: no configurations");

  fs::create_directories(work_dir);
  const fs::path train_path = fs::path(work_dir) / "bench_train.fds";
  const fs::path val_path = fs::path(work_dir) / "bench_val.fds";
  {
    const auto [train, val] = generate_synthetic(spec);
    save_dataset(train, train_path.string());
    save_dataset(val, val_path.string());
  }

  BenchReport report;
  int run_index = 0;
  for (const BenchConfig& config : configs) {
    if (config.workers < 1) throw std::invalid_argument("bench: workers must be >= 1");
    const std::string rendezvous = "127.0.0.1:" + std::to_string(pick_free_port());

    std::vector<fs::path> metrics_paths;
    for (int rank = 0; rank < config.workers; ++rank) {
      metrics_paths.push_back(fs::path(work_dir) / ("bench_run" + std::to_string(run_index) +
                                                    "_rank" + std::to_string(rank) + ".jsonl"));
    }

    const auto start = std::chrono::steady_clock::now();
    std::vector<std::unique_ptr<ChildProcess>> children;
    for (int rank = 0; rank < config.workers; ++rank) {
      children.push_back(std::make_unique<ChildProcess>(worker_argv(
          exe, config, rank, rendezvous, train_path, val_path, metrics_paths[rank])));
    }
    bool failed = false;
    std::string failure;
    for (int rank = 0; rank < config.workers; ++rank) {
      const int code = children[rank]->wait();
      if (code != 0 && !failed) {
        failed = true;
        failure = "bench: worker " + std::to_string(rank) + " exited with code " +
                  std::to_string(code) + "\n" + children[rank]->output();
      }
    }
    if (failed) throw std::runtime_error(failure);
    const auto end = std::chrono::steady_clock::now();
    const double wall_ms = std::chrono::duration<double, std::milli>(end - start).count();

    report.rows.push_back(summarize_metrics(metrics_paths[0], config, wall_ms));
    ++run_index;
  }
  return report;
}

std::string report_jsonl(const BenchReport& report) {
  std::string out;
  for (const BenchRow& row : report.rows) {
    nlohmann::ordered_json line;
    line["workers"] = row.workers;
    line["seed"] = row.seed;
    line["epochs_to_stop"] = row.epochs_to_stop;
    line["best_val_acc"] = row.best_val_acc;
    line["total_wall_ms"] = row.total_wall_ms;
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::string report_table(const BenchReport& report) {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-8s %-12s %-15s %-13s %-14s\n", "workers", "seed",
                "epochs_to_stop", "best_val_acc", "total_wall_ms");
  out << buf;
  for (const BenchRow& row : report.rows) {
    std::snprintf(buf, sizeof(buf), "%-8d %-12llu %-15d %-13.4f %-14.1f\n", row.workers,
                  static_cast<unsigned long long>(row.seed), row.epochs_to_stop,
                  static_cast<double>(row.best_val_acc), row.total_wall_ms);
    out << buf;
  }
  return out.str();
}

}  // namespace socketrain
