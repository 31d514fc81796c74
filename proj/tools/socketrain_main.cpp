// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0
//
// socketrain: CPU transfer-learning toolkit. Subcommands: plan (affinity
// recipes), gen-data (synthetic feature datasets), train (single worker or
// one distributed rank), launch (spawn a local worker group), bench
// (epochs-to-convergence benchmark).

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "socketrain/bench.hpp"
#include "socketrain/dataset.hpp"
#include "socketrain/distributed.hpp"
#include "socketrain/model.hpp"
#include "socketrain/subprocess.hpp"
#include "socketrain/synthetic.hpp"
#include "socketrain/topology.hpp"
#include "socketrain/transport.hpp"

namespace {

namespace fs = std::filesystem;
using namespace socketrain;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Flat key=value config support. CLI11's own set_config never fires for
// subcommands, so the merge is done up front: keys from the file are turned
// into --key=value tokens appended after the user's arguments, but only for
// flags the user did not pass, so command-line flags always win.
std::vector<std::string> merge_config_file(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    }
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in) throw std::invalid_argument("cannot open config file " + config_path);
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    if (line.empty() || line[0] == '#' || line[0] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw std::invalid_argument("config file: malformed line '" + line + "'");
    }
    const std::string flag = "--" + line.substr(0, eq);
    bool given = false;
    for (const std::string& arg : args) {
      if (arg == flag || arg.rfind(flag + "=", 0) == 0) {
        given = true;
        break;
      }
    }
    if (!given) args.push_back(flag + "=" + line.substr(eq + 1));
  }
  return args;
}

void print_resolved(const CLI::App* sub) {
  std::cout << "# resolved configuration (" << sub->get_name() << ")\n";
  std::istringstream lines(sub->config_to_str(/*default_also=*/true, /*write_description=*/false));
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty()) std::cout << "# " << line << "\n";
  }
  std::cout.flush();
}

struct PlanFlags {
  std::string topology;
  int socket = 0;
  int distributed = 0;
  bool no_hyperthreads = false;
  std::string command = "python train.py";
};

struct DataFlags {
  std::string train_path;
  std::string val_path;
  SyntheticSpec spec;
};

struct TrainFlags {
  std::string data_path;
  std::string val_path;
  std::string precision = "fp32";
  float base_lr = 0.001f;
  float momentum = 0.9f;
  int batch_size = 32;
  int patience = 10;
  int max_epochs = 200;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency
  std::string metrics = "-";
  int workers = 1;
  int worker_id = 0;
  std::string rendezvous = "127.0.0.1:29500";
  int avg_period = 5;
  int warmup = 3;
  int timeout_ms = 60000;
};

struct LaunchFlags {
  TrainFlags train;
  bool pin = false;
  std::string topology;
};

struct BenchFlags {
  TrainFlags train;
  std::vector<int> workers = {1, 2};
  std::vector<std::uint64_t> seeds = {0};
  SyntheticSpec spec;
  std::string report = "-";
  std::string work_dir;
};

void add_synthetic_options(CLI::App* sub, SyntheticSpec& spec) {
  sub->add_option("--n-train", spec.n_train, "training samples")->capture_default_str();
  sub->add_option("--n-val", spec.n_val, "validation samples")->capture_default_str();
  sub->add_option("--dim", spec.d, "feature dimension")->capture_default_str();
  sub->add_option("--classes", spec.c, "class count")->capture_default_str();
  sub->add_option("--separation", spec.class_separation, "center distance from the origin")
      ->capture_default_str();
  sub->add_option("--noise", spec.noise_sigma, "per-coordinate noise sigma")
      ->capture_default_str();
}

CLI::Option* add_train_options(CLI::App* sub, TrainFlags& f, bool distributed_rank_flags) {
  sub->add_option("--data", f.data_path, "training dataset (FDS1)")->required();
  sub->add_option("--val", f.val_path, "validation dataset (FDS1)")->required();
  sub->add_option("--precision", f.precision, "compute precision")
      ->check(CLI::IsMember({"fp32", "bf16"}))
      ->capture_default_str();
  sub->add_option("--base-lr", f.base_lr, "base learning rate")->capture_default_str();
  sub->add_option("--momentum", f.momentum, "SGD momentum")->capture_default_str();
  sub->add_option("--batch-size", f.batch_size, "minibatch size")->capture_default_str();
  sub->add_option("--patience", f.patience, "early-stopping patience (epochs)")
      ->capture_default_str();
  sub->add_option("--max-epochs", f.max_epochs, "epoch cap")->capture_default_str();
  sub->add_option("--seed", f.seed, "RNG seed")->capture_default_str();
  CLI::Option* threads =
      sub->add_option("--threads", f.threads, "intra-op threads (0 = all cores)")
          ->capture_default_str();
  sub->add_option("--metrics", f.metrics, "metrics stream path ('-' = stdout)")
      ->capture_default_str();
  sub->add_option("--avg-period", f.avg_period, "epochs between parameter averages")
      ->capture_default_str();
  sub->add_option("--warmup", f.warmup, "LR warmup epochs (distributed)")->capture_default_str();
  sub->add_option("--rendezvous", f.rendezvous,
                  "rendezvous host:port (env SOCKETRAIN_RENDEZVOUS overrides)")
      ->capture_default_str();
  sub->add_option("--timeout-ms", f.timeout_ms, "distributed I/O timeout")->capture_default_str();
  if (distributed_rank_flags) {
    sub->add_option("--workers", f.workers, "worker count")->capture_default_str();
    sub->add_option("--worker-id", f.worker_id, "this worker's rank")->capture_default_str();
  }
  return threads;
}

int resolve_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::string resolve_rendezvous(const std::string& flag_value) {
  const char* env = std::getenv("SOCKETRAIN_RENDEZVOUS");
  if (env != nullptr && env[0] != '\0') return env;
  return flag_value;
}

TrainConfig to_train_config(const TrainFlags& f) {
  TrainConfig cfg;
  cfg.base_lr = f.base_lr;
  cfg.momentum = f.momentum;
  cfg.batch_size = f.batch_size;
  cfg.max_epochs = f.max_epochs;
  cfg.patience = f.patience;
  cfg.precision = f.precision == "bf16" ? PrecisionMode::kBf16Mixed : PrecisionMode::kFp32;
  cfg.seed = f.seed;
  cfg.intra_op_threads = resolve_threads(f.threads);
  return cfg;
}

int cmd_plan(const PlanFlags& f) {
  const CpuTopology topo = load_topology(f.topology);
  std::vector<AffinityPlan> plans;
  if (f.distributed > 0) {
    plans = plan_distributed(topo, f.distributed);
  } else {
    plans.push_back(plan_single_socket(topo, f.socket, !f.no_hyperthreads));
  }
  for (std::size_t k = 0; k < plans.size(); ++k) {
    if (plans.size() > 1) std::cout << "# worker " << k << "\n";
    std::cout << render_launch(plans[k], f.command) << "\n";
    for (const auto& [key, value] : plans[k].env) {
      std::cout << key << "=" << value << "\n";
    }
    if (k + 1 < plans.size()) std::cout << "\n";
  }
  return kExitOk;
}

int cmd_gen_data(const DataFlags& f) {
  const auto [train, val] = generate_synthetic(f.spec);
  save_dataset(train, f.train_path);
  save_dataset(val, f.val_path);
  std::cout << "wrote " << f.train_path << " (" << train.n << "x" << train.d << ", " << train.c
            << " classes)\n";
  std::cout << "wrote " << f.val_path << " (" << val.n << "x" << val.d << ", " << val.c
            << " classes)\n";
  return kExitOk;
}

int cmd_train(const TrainFlags& f) {
  const FeatureDataset train_data = load_dataset(f.data_path);
  const FeatureDataset val_data = load_dataset(f.val_path);
  const TrainConfig cfg = to_train_config(f);

  std::ofstream metrics_file;
  std::ostream* metrics_out = &std::cout;
  if (f.metrics != "-") {
    metrics_file.open(f.metrics, std::ios::trunc);
    if (!metrics_file) throw std::runtime_error("cannot open metrics path " + f.metrics);
    metrics_out = &metrics_file;
  }
  const EpochCallback on_epoch = [&](const EpochRecord& record) {
    (*metrics_out) << metrics_json_line(record) << "\n";
    metrics_out->flush();
  };

  const auto start = std::chrono::steady_clock::now();
  TrainResult result;
  if (f.workers <= 1) {
    const float lr = f.base_lr;
    result = train(train_data, val_data, cfg, [lr](int) { return lr; }, {}, on_epoch);
  } else {
    DistConfig dist;
    dist.num_workers = f.workers;
    dist.worker_id = f.worker_id;
    dist.rendezvous_addr = resolve_rendezvous(f.rendezvous);
    dist.averaging_period = f.avg_period;
    dist.warmup_epochs = f.warmup;
    dist.base_lr = f.base_lr;
    dist.timeout_ms = f.timeout_ms;
    result = distributed_train(dist, cfg, train_data, val_data, on_epoch);
  }
  const auto end = std::chrono::steady_clock::now();

  float best_acc = 0.0f;
  for (const EpochRecord& r : result.history) best_acc = std::max(best_acc, r.val_accuracy);
  std::printf("# done epochs=%zu best_val_acc=%.4f wall_ms=%.1f\n", result.history.size(),
              static_cast<double>(best_acc),
              std::chrono::duration<double, std::milli>(end - start).count());
  return kExitOk;
}

int cmd_launch(const LaunchFlags& f, bool threads_given) {
  if (f.train.workers < 1) throw std::invalid_argument("launch: --workers must be >= 1");

  std::vector<AffinityPlan> plans;
  bool pin = f.pin;
  std::string numactl;
  if (pin) {
    const CpuTopology topo = load_topology(f.topology);
    plans = plan_distributed(topo, f.train.workers);  // throws when workers exceed sockets
    numactl = find_in_path("numactl");
    if (numactl.empty()) {
      std::cerr << "warning: numactl not found in PATH; running unpinned\n";
      pin = false;
    }
  }

  std::string rendezvous = resolve_rendezvous(f.train.rendezvous);
  if (f.train.workers > 1 && f.train.rendezvous == "127.0.0.1:29500" &&
      std::getenv("SOCKETRAIN_RENDEZVOUS") == nullptr) {
    rendezvous = "127.0.0.1:" + std::to_string(pick_free_port());
  }

  const std::string exe = self_exe_path();
  std::vector<std::unique_ptr<ChildProcess>> children;
  for (int rank = 0; rank < f.train.workers; ++rank) {
    std::vector<std::string> argv;
    std::vector<std::pair<std::string, std::string>> env;
    if (pin) {
      const AffinityPlan& plan = plans[rank];
      argv = {numactl, "-C", compress_cpu_list(plan.cpu_ids), "-m",
              std::to_string(plan.memory_node)};
      env.assign(plan.env.begin(), plan.env.end());
    }
    argv.insert(argv.end(), {exe, "train",
                             "--data", f.train.data_path,
                             "--val", f.train.val_path,
                             "--precision", f.train.precision,
                             "--base-lr", std::to_string(f.train.base_lr),
                             "--momentum", std::to_string(f.train.momentum),
                             "--batch-size", std::to_string(f.train.batch_size),
                             "--patience", std::to_string(f.train.patience),
                             "--max-epochs", std::to_string(f.train.max_epochs),
                             "--seed", std::to_string(f.train.seed),
                             "--avg-period", std::to_string(f.train.avg_period),
                             "--warmup", std::to_string(f.train.warmup),
                             "--timeout-ms", std::to_string(f.train.timeout_ms)});
    int threads = f.train.threads;
    if (!threads_given && pin) threads = plans[rank].intra_op_threads;
    argv.insert(argv.end(), {"--threads", std::to_string(threads)});
    if (f.train.workers > 1) {
      argv.insert(argv.end(), {"--workers", std::to_string(f.train.workers),
                               "--worker-id", std::to_string(rank),
                               "--rendezvous", rendezvous});
    }
    if (rank == 0) {
      argv.insert(argv.end(), {"--metrics", f.train.metrics});
    } else {
      argv.insert(argv.end(), {"--metrics", "-"});
    }

    // Rank 0's output (metrics stream included when --metrics is '-') is
    // forwarded live; other ranks are captured and shown only on failure.
    ChildProcess::LineCallback forward;
    if (rank == 0) {
      forward = [](const std::string& line) {
        std::cout << line << "\n";
        std::cout.flush();
      };
    }
    children.push_back(std::make_unique<ChildProcess>(std::move(argv), std::move(env), forward));
  }

  int status = kExitOk;
  for (int rank = 0; rank < f.train.workers; ++rank) {
    const int code = children[rank]->wait();
    if (code != 0) {
      status = kExitRuntime;
      std::cerr << "worker " << rank << " exited with code " << code << "\n";
      if (rank != 0) std::cerr << children[rank]->output();
    }
  }
  return status;
}

int cmd_bench(const BenchFlags& f) {
  std::vector<BenchConfig> configs;
  for (int workers : f.workers) {
    for (std::uint64_t seed : f.seeds) {
      BenchConfig config;
      config.workers = workers;
      TrainFlags tf = f.train;
      tf.seed = seed;
      config.train = to_train_config(tf);
      config.dist.num_workers = workers;
      config.dist.averaging_period = f.train.avg_period;
      config.dist.warmup_epochs = f.train.warmup;
      config.dist.base_lr = f.train.base_lr;
      config.dist.timeout_ms = f.train.timeout_ms;
      configs.push_back(config);
    }
  }

  const bool temp_dir = f.work_dir.empty();
  const std::string work_dir =
      temp_dir ? (fs::temp_directory_path() / ("socketrain-bench-" + std::to_string(::getpid())))
                     .string()
               : f.work_dir;

  const BenchReport report = run_benchmark(configs, f.spec, self_exe_path(), work_dir);
  std::cout << report_table(report);
  if (f.report == "-") {
    std::cout << report_jsonl(report);
  } else {
    std::ofstream out(f.report, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open report path " + f.report);
    out << report_jsonl(report);
  }
  if (temp_dir) {
    std::error_code ec;
    fs::remove_all(work_dir, ec);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"socketrain: NUMA-aware CPU transfer-learning toolkit"};
  app.require_subcommand(1);
  std::string config_file;

  PlanFlags plan_flags;
  CLI::App* plan_cmd = app.add_subcommand("plan", "print an affinity plan and launch command");
  plan_cmd->add_option("--config", config_file, "key=value config file (flags win)");
  plan_cmd->add_option("--topology", plan_flags.topology,
                       "topology description file, or 'live' to probe the host")
      ->required();
  CLI::Option* socket_opt =
      plan_cmd->add_option("--socket", plan_flags.socket, "plan one socket")->capture_default_str();
  CLI::Option* dist_opt =
      plan_cmd->add_option("--distributed", plan_flags.distributed, "plan N one-per-socket workers");
  socket_opt->excludes(dist_opt);
  plan_cmd->add_flag("--no-hyperthreads", plan_flags.no_hyperthreads,
                     "physical cores only (single-socket plans)");
  plan_cmd->add_option("--command", plan_flags.command, "command to wrap")->capture_default_str();

  DataFlags data_flags;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic feature dataset");
  gen_cmd->add_option("--config", config_file, "key=value config file (flags win)");
  gen_cmd->add_option("--data", data_flags.train_path, "output path for the training split")
      ->required();
  gen_cmd->add_option("--val", data_flags.val_path, "output path for the validation split")
      ->required();
  gen_cmd->add_option("--seed", data_flags.spec.seed, "dataset seed")->capture_default_str();
  add_synthetic_options(gen_cmd, data_flags.spec);

  TrainFlags train_flags;
  CLI::App* train_cmd =
      app.add_subcommand("train", "train the classifier head (one process = one worker)");
  train_cmd->add_option("--config", config_file, "key=value config file (flags win)");
  add_train_options(train_cmd, train_flags, /*distributed_rank_flags=*/true);

  LaunchFlags launch_flags;
  CLI::App* launch_cmd = app.add_subcommand("launch", "spawn a local distributed worker group");
  launch_cmd->add_option("--config", config_file, "key=value config file (flags win)");
  launch_flags.train.workers = 2;
  CLI::Option* launch_threads = add_train_options(launch_cmd, launch_flags.train, false);
  launch_cmd->add_option("--workers", launch_flags.train.workers, "worker count")
      ->capture_default_str();
  launch_cmd->add_flag("--pin,!--no-pin", launch_flags.pin,
                       "wrap workers in their numactl affinity plans");
  launch_cmd->add_option("--topology", launch_flags.topology,
                         "topology description file or 'live' (required with --pin)");

  BenchFlags bench_flags;
  CLI::App* bench_cmd =
      app.add_subcommand("bench", "epochs-to-convergence benchmark over worker counts");
  bench_cmd->add_option("--config", config_file, "key=value config file (flags win)");
  bench_flags.train.data_path = "unused";
  bench_flags.train.val_path = "unused";
  bench_cmd->add_option("--workers", bench_flags.workers, "worker counts, e.g. 1,2")
      ->delimiter(',')
      ->capture_default_str();
  bench_cmd->add_option("--seeds", bench_flags.seeds, "training seeds, e.g. 0,1,2")
      ->delimiter(',')
      ->capture_default_str();
  bench_cmd->add_option("--data-seed", bench_flags.spec.seed, "dataset seed")
      ->capture_default_str();
  add_synthetic_options(bench_cmd, bench_flags.spec);
  bench_cmd->add_option("--precision", bench_flags.train.precision, "compute precision")
      ->check(CLI::IsMember({"fp32", "bf16"}))
      ->capture_default_str();
  bench_cmd->add_option("--base-lr", bench_flags.train.base_lr, "base learning rate")
      ->capture_default_str();
  bench_cmd->add_option("--momentum", bench_flags.train.momentum, "SGD momentum")
      ->capture_default_str();
  bench_cmd->add_option("--batch-size", bench_flags.train.batch_size, "minibatch size")
      ->capture_default_str();
  bench_cmd->add_option("--patience", bench_flags.train.patience, "early-stopping patience")
      ->capture_default_str();
  bench_cmd->add_option("--max-epochs", bench_flags.train.max_epochs, "epoch cap")
      ->capture_default_str();
  bench_cmd->add_option("--threads", bench_flags.train.threads, "intra-op threads per worker")
      ->capture_default_str();
  bench_cmd->add_option("--avg-period", bench_flags.train.avg_period,
                        "epochs between parameter averages")
      ->capture_default_str();
  bench_cmd->add_option("--warmup", bench_flags.train.warmup, "LR warmup epochs")
      ->capture_default_str();
  bench_cmd->add_option("--timeout-ms", bench_flags.train.timeout_ms, "distributed I/O timeout")
      ->capture_default_str();
  bench_cmd->add_option("--report", bench_flags.report, "JSONL report path ('-' = stdout)")
      ->capture_default_str();
  bench_cmd->add_option("--work-dir", bench_flags.work_dir,
                        "scratch directory (default: a temp dir, removed afterwards)");

  std::vector<std::string> args;
  try {
    args = merge_config_file(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (app.got_subcommand(plan_cmd)) {
      print_resolved(plan_cmd);
      return cmd_plan(plan_flags);
    }
    if (app.got_subcommand(gen_cmd)) {
      print_resolved(gen_cmd);
      return cmd_gen_data(data_flags);
    }
    if (app.got_subcommand(train_cmd)) {
      print_resolved(train_cmd);
      return cmd_train(train_flags);
    }
    if (app.got_subcommand(launch_cmd)) {
      print_resolved(launch_cmd);
      return cmd_launch(launch_flags, launch_threads->count() > 0);
    }
    if (app.got_subcommand(bench_cmd)) {
      print_resolved(bench_cmd);
      return cmd_bench(bench_flags);
    }
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
