// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "socketrain/distributed.hpp"
#include "socketrain/model.hpp"
#include "socketrain/synthetic.hpp"

namespace socketrain {

/// One benchmark configuration: a worker count plus the training and
/// distributed settings to run it with.
struct BenchConfig {
  int workers = 1;
  TrainConfig train;
  DistConfig dist;
};

struct BenchRow {
  int workers = 0;
  std::uint64_t seed = 0;
  int epochs_to_stop = 0;
  float best_val_acc = 0.0f;
  double total_wall_ms = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
};

/// Runs every configuration against the same generated dataset. Worker
/// processes are spawned from `exe` (the socketrain binary) so each one is a
/// real pinnable process; configurations run sequentially. Dataset and
/// metrics files live under work_dir, which is created if needed.
BenchReport run_benchmark(const std::vector<BenchConfig>& configs, const SyntheticSpec& spec,
                          const std::string& exe, const std::string& work_dir);

/// One JSON object per row, keys workers, seed, epochs_to_stop,
/// best_val_acc, total_wall_ms.
std::string report_jsonl(const BenchReport& report);

/// Aligned plain-text table of the same rows.
std::string report_table(const BenchReport& report);

}  // namespace socketrain
