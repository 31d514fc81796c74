// Copyright (c) 2026 Socketrain Contributors
// SPDX-License-Identifier: Apache-2.0

#include "socketrain/subprocess.hpp"

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <sstream>
#include <stdexcept>

namespace socketrain {

ChildProcess::ChildProcess(std::vector<std::string> argv,
                           std::vector<std::pair<std::string, std::string>> extra_env,
                           LineCallback on_line)
    : argv_(std::move(argv)), on_line_(std::move(on_line)) {
  if (argv_.empty()) throw std::invalid_argument("subprocess: empty argv");

  int pipe_fds[2];
  if (::pipe(pipe_fds) != 0) {
    throw std::runtime_error(std::string("subprocess: pipe: ") + std::strerror(errno));
  }

  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(pipe_fds[0]);
    ::close(pipe_fds[1]);
    throw std::runtime_error(std::string("subprocess: fork: ") + std::strerror(errno));
  }

  if (pid == 0) {
    ::close(pipe_fds[0]);
    ::dup2(pipe_fds[1], STDOUT_FILENO);
    ::dup2(pipe_fds[1], STDERR_FILENO);
    ::close(pipe_fds[1]);
    for (const auto& [key, value] : extra_env) {
      ::setenv(key.c_str(), value.c_str(), 1);
    }
    std::vector<char*> cargv;
    cargv.reserve(argv_.size() + 1);
    for (std::string& arg : argv_) cargv.push_back(arg.data());
    cargv.push_back(nullptr);
    ::execv(cargv[0], cargv.data());
    // Only reached when exec fails.
    std::fprintf(stderr, "exec %s: %s\n", cargv[0], std::strerror(errno));
    ::_exit(127);
  }

  ::close(pipe_fds[1]);
  pid_ = pid;
  drain_thread_ = std::thread([this, fd = pipe_fds[0]] { drain(fd); });
}

void ChildProcess::drain(int fd) {
  std::string pending;
  char buf[4096];
  for (;;) {
    const ssize_t n = ::read(fd, buf, sizeof(buf));
    if (n < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (n == 0) break;
    pending.append(buf, static_cast<std::size_t>(n));
    std::size_t newline;
    while ((newline = pending.find('\n')) != std::string::npos) {
      const std::string line = pending.substr(0, newline);
      pending.erase(0, newline + 1);
      output_ += line;
      output_ += '\n';
      if (on_line_) on_line_(line);
    }
  }
  if (!pending.empty()) {
    output_ += pending;
    if (on_line_) on_line_(pending);
  }
  ::close(fd);
}

int ChildProcess::wait() {
  if (waited_) return exit_code_;
  if (drain_thread_.joinable()) drain_thread_.join();
  int status = 0;
  while (::waitpid(static_cast<pid_t>(pid_), &status, 0) < 0) {
    if (errno != EINTR) {
      throw std::runtime_error(std::string("subprocess: waitpid: ") + std::strerror(errno));
    }
  }
  if (WIFEXITED(status)) {
    exit_code_ = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    exit_code_ = 128 + WTERMSIG(status);
  } else {
    exit_code_ = -1;
  }
  waited_ = true;
  return exit_code_;
}

ChildProcess::~ChildProcess() {
  if (!waited_ && pid_ > 0) {
    try {
      wait();
    } catch (...) {
    }
  }
  if (drain_thread_.joinable()) drain_thread_.join();
}

std::string find_in_path(const std::string& name) {
  const char* path = std::getenv("PATH");
  if (path == nullptr) return "";
  std::istringstream dirs(path);
  std::string dir;
  while (std::getline(dirs, dir, ':')) {
    if (dir.empty()) continue;
    const std::filesystem::path candidate = std::filesystem::path(dir) / name;
    std::error_code ec;
    if (std::filesystem::is_regular_file(candidate, ec) &&
        ::access(candidate.c_str(), X_OK) == 0) {
      return candidate.string();
    }
  }
  return "";
}

std::string self_exe_path() {
  char buf[4096];
  const ssize_t n = ::readlink("/proc/self/exe", buf, sizeof(buf) - 1);
  if (n < 0) throw std::runtime_error("subprocess: cannot resolve /proc/self/exe");
  buf[n] = '\0';
  return buf;
}

}  // namespace socketrain
