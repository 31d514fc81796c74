// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#include "socketrain/topology.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace socketrain {

namespace {

void validate(const CpuTopology& topo) {
  if (topo.sockets < 1) throw std::invalid_argument("topology: sockets must be >= 1");
  if (topo.cores_per_socket < 1) {
    throw std::invalid_argument("topology: cores_per_socket must be >= 1");
  }
  if (topo.threads_per_core != 1 && topo.threads_per_core != 2) {
    throw std::invalid_argument("topology: threads_per_core must be 1 or 2");
  }
  if (topo.enumeration != "sequential") {
    throw std::invalid_argument("topology: unsupported enumeration scheme '" + topo.enumeration +
                                "'");
  }
}

int parse_count(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  int n = 0;
  try {
    n = std::stoi(value, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("topology: bad value for " + key + ": '" + value + "'");
  }
  if (pos != value.size()) {
    throw std::invalid_argument("topology: bad value for " + key + ": '" + value + "'");
  }
  return n;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

CpuTopology parse_topology(const std::string& text) {
  CpuTopology topo;
  std::set<std::string> seen;
  bool have_sockets = false, have_cores = false, have_threads = false;

  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("topology: malformed line '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) {
      throw std::invalid_argument("topology: duplicate key '" + key + "'");
    }
    if (key == "sockets") {
      topo.sockets = parse_count(key, value);
      have_sockets = true;
    } else if (key == "cores_per_socket") {
      topo.cores_per_socket = parse_count(key, value);
      have_cores = true;
    } else if (key == "threads_per_core") {
      topo.threads_per_core = parse_count(key, value);
      have_threads = true;
    } else if (key == "enumeration") {
      topo.enumeration = value;
    } else {
      throw std::invalid_argument("topology: unknown key '" + key + "'");
    }
  }
  if (!have_sockets || !have_cores || !have_threads) {
    throw std::invalid_argument(
        "topology: sockets, cores_per_socket and threads_per_core are required");
  }
  validate(topo);
  return topo;
}

CpuTopology load_topology_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("topology: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_topology(buf.str());
}

CpuTopology probe_topology() {
  namespace fs = std::filesystem;
  const fs::path root("/sys/devices/system/cpu");
  if (!fs::exists(root)) {
    throw std::runtime_error("topology probe: no CPU inventory on this host");
  }

  // package id -> set of core ids; logical count comes from cpuN entries.
  std::map<int, std::set<int>> packages;
  int logical = 0;
  for (const auto& entry : fs::directory_iterator(root)) {
    const std::string name = entry.path().filename().string();
    if (name.size() < 4 || name.compare(0, 3, "cpu") != 0) continue;
    if (name.find_first_not_of("0123456789", 3) != std::string::npos) continue;

    std::ifstream pkg(entry.path() / "topology/physical_package_id");
    std::ifstream core(entry.path() / "topology/core_id");
    int package_id = -1, core_id = -1;
    if (!(pkg >> package_id) || !(core >> core_id)) {
      throw std::runtime_error("topology probe: unreadable topology for " + name);
    }
    packages[package_id].insert(core_id);
    ++logical;
  }
  if (packages.empty() || logical == 0) {
    throw std::runtime_error("topology probe: no CPUs found");
  }

  CpuTopology topo;
  topo.sockets = static_cast<int>(packages.size());
  topo.cores_per_socket = static_cast<int>(packages.begin()->second.size());
  for (const auto& [id, cores] : packages) {
    if (static_cast<int>(cores.size()) != topo.cores_per_socket) {
      throw std::runtime_error("topology probe: asymmetric sockets");
    }
  }
  const int physical = topo.sockets * topo.cores_per_socket;
  if (logical % physical != 0) {
    throw std::runtime_error("topology probe: inconsistent logical CPU count");
  }
  topo.threads_per_core = logical / physical;
  validate(topo);
  return topo;
}

CpuTopology load_topology(const std::string& source) {
  if (source == "live") return probe_topology();
  return load_topology_file(source);
}

AffinityPlan plan_single_socket(const CpuTopology& topo, int socket, bool use_hyperthreads) {
  validate(topo);
  if (socket < 0 || socket >= topo.sockets) {
    throw std::invalid_argument("plan: socket index " + std::to_string(socket) +
                                " out of range (sockets=" + std::to_string(topo.sockets) + ")");
  }
  const int cores = topo.cores_per_socket;
  AffinityPlan plan;
  plan.memory_node = socket;
  plan.cpu_ids.reserve(static_cast<std::size_t>(cores) * 2);
  const int physical_base = socket * cores;
  for (int c = 0; c < cores; ++c) plan.cpu_ids.push_back(physical_base + c);
  if (use_hyperthreads && topo.threads_per_core == 2) {
    const int sibling_base = topo.sockets * cores + physical_base;
    for (int c = 0; c < cores; ++c) plan.cpu_ids.push_back(sibling_base + c);
  }
  plan.inter_op_threads = cores;
  plan.intra_op_threads = cores;
  plan.env = {
      {"KMP_SETTINGS", "1"},
      {"KMP_BLOCKTIME", "1"},
      {"OMP_NUM_THREADS", std::to_string(cores)},
      {"KMP_AFFINITY", "granularity=fine,compact,1,0"},
  };
  return plan;
}

std::vector<AffinityPlan> plan_distributed(const CpuTopology& topo, int workers) {
  validate(topo);
  if (workers < 1) throw std::invalid_argument("plan: workers must be >= 1");
  if (workers > topo.sockets) {
    throw std::invalid_argument("plan: workers exceed sockets (" + std::to_string(workers) + " > " +
                                std::to_string(topo.sockets) + ")");
  }
  // Two cores per socket are left for the communication stack.
  const int threads = std::max(1, topo.cores_per_socket - 2);
  std::vector<AffinityPlan> plans;
  plans.reserve(workers);
  for (int k = 0; k < workers; ++k) {
    AffinityPlan plan = plan_single_socket(topo, k, /*use_hyperthreads=*/true);
    plan.intra_op_threads = threads;
    for (auto& [key, value] : plan.env) {
      if (key == "OMP_NUM_THREADS") value = std::to_string(threads);
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

std::string compress_cpu_list(const std::vector<int>& cpu_ids) {
  std::string out;
  std::size_t i = 0;
  while (i < cpu_ids.size()) {
    std::size_t j = i;
    while (j + 1 < cpu_ids.size() && cpu_ids[j + 1] == cpu_ids[j] + 1) ++j;
    if (!out.empty()) out += ',';
    out += std::to_string(cpu_ids[i]);
    if (j > i) out += '-' + std::to_string(cpu_ids[j]);
    i = j + 1;
  }
  return out;
}

std::string render_launch(const AffinityPlan& plan, const std::string& command) {
  if (plan.cpu_ids.empty()) throw std::invalid_argument("render_launch: empty cpu list");
  std::string out = "numactl -C " + compress_cpu_list(plan.cpu_ids) + " -m " +
                    std::to_string(plan.memory_node) + " env";
  for (const auto& [key, value] : plan.env) {
    out += ' ' + key + '=' + value;
  }
  out += ' ' + command;
  return out;
}

}  // namespace socketrain
