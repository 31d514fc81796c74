// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace socketrain {

/// A child process with its stdout (stderr merged) drained by a background
/// thread. `on_line` runs on the drain thread as lines arrive; the full
/// output is also retained for post-mortem reporting.
class ChildProcess {
 public:
  using LineCallback = std::function<void(const std::string&)>;

  /// argv[0] is the executable path. extra_env entries are added to the
  /// inherited environment.
  ChildProcess(std::vector<std::string> argv,
               std::vector<std::pair<std::string, std::string>> extra_env = {},
               LineCallback on_line = {});
  ~ChildProcess();
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  /// Block until exit; returns the exit code (or 128+signal).
  int wait();

  const std::string& output() const { return output_; }
  const std::vector<std::string>& argv() const { return argv_; }

 private:
  void drain(int fd);

  std::vector<std::string> argv_;
  long pid_ = -1;
  int exit_code_ = -1;
  bool waited_ = false;
  std::string output_;
  LineCallback on_line_;
  std::thread drain_thread_;
};

/// Search PATH for an executable; empty string when absent.
std::string find_in_path(const std::string& name);

/// Path of the running executable (/proc/self/exe).
std::string self_exe_path();

}  // namespace socketrain
