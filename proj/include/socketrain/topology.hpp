// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

namespace socketrain {

/// Machine shape. Logical CPU enumeration is "sequential": physical cores
/// come first, socket-major (socket s, core c -> s*C + c), followed by their
/// hyperthread siblings in the same order (S*C + s*C + c). This is the
/// common Linux layout on two-socket Xeon hosts and the only scheme
/// consistent with a 0-55,112-167 core list on a 2x56 HT machine.
struct CpuTopology {
  int sockets = 1;
  int cores_per_socket = 1;
  int threads_per_core = 1;  // 1 or 2
  std::string enumeration = "sequential";

  int logical_cpus() const { return sockets * cores_per_socket * threads_per_core; }
};

/// A concrete pinning recipe: which logical CPUs to run on, which NUMA node
/// to bind memory to, and the environment block that goes with it. env
/// preserves emission order (KMP_SETTINGS, KMP_BLOCKTIME, OMP_NUM_THREADS,
/// KMP_AFFINITY) so rendered launch commands are reproducible
/// character-for-character.
struct AffinityPlan {
  std::vector<int> cpu_ids;
  int memory_node = 0;
  std::vector<std::pair<std::string, std::string>> env;
  int inter_op_threads = 0;
  int intra_op_threads = 0;
};

/// Parse a topology description: plain key=value lines (sockets=2,
/// cores_per_socket=56, threads_per_core=2, optional enumeration=sequential).
/// Blank lines and #-comments are ignored; unknown or duplicate keys are
/// rejected, as are counts that violate the CpuTopology invariants.
CpuTopology parse_topology(const std::string& text);

/// Read and parse a topology description file.
CpuTopology load_topology_file(const std::string& path);

/// Probe the host's CPU inventory via sysfs. Throws if the inventory is
/// unavailable or inconsistent (asymmetric sockets, threads_per_core not in
/// {1,2}); never guesses.
CpuTopology probe_topology();

/// source == "live" probes the host; anything else is a description file path.
CpuTopology load_topology(const std::string& source);

/// Pin to one socket: the socket's physical cores, plus their hyperthread
/// siblings when use_hyperthreads and the topology has them. Threads and the
/// env block follow the single-socket tuning recipe (inter-op = intra-op =
/// OMP_NUM_THREADS = cores_per_socket).
AffinityPlan plan_single_socket(const CpuTopology& topo, int socket, bool use_hyperthreads);

/// One plan per worker, worker k pinned to socket k (physical cores + HT
/// siblings, memory node k). Distributed tuning reserves two cores for the
/// communication stack: intra_op_threads = OMP_NUM_THREADS =
/// cores_per_socket - 2 (clamped to >= 1); inter-op stays at
/// cores_per_socket.
std::vector<AffinityPlan> plan_distributed(const CpuTopology& topo, int workers);

/// Compress sorted CPU ids into the numactl range syntax: consecutive runs
/// become "a-b", singletons stay "a", runs join with commas.
std::string compress_cpu_list(const std::vector<int>& cpu_ids);

/// Render `numactl -C <ranges> -m <node> env K1=V1 ... <command>`.
std::string render_launch(const AffinityPlan& plan, const std::string& command);

}  // namespace socketrain
