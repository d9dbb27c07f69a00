#ifndef BAL_EXTERNAL_SIMULATOR_HPP
#define BAL_EXTERNAL_SIMULATOR_HPP

// Simulator backed by a child process speaking a line protocol on stdin/stdout:
//
//   request:  d space-separated decimal reals, newline
//   response: one decimal real, newline
//
// A nonzero exit, EOF, or a malformed response line is an evaluation error.
// POSIX only.

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <csignal>
#include <cstdio>
#include <cstring>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "bal/errors.hpp"

namespace bal {

class ExternalSimulator {
 public:
  explicit ExternalSimulator(std::string path, std::vector<std::string> args = {})
      : path_(std::move(path)), args_(std::move(args)) {
    start();
  }
  ExternalSimulator(const ExternalSimulator&) = delete;
  ExternalSimulator& operator=(const ExternalSimulator&) = delete;
  ~ExternalSimulator() { stop(); }

  double operator()(std::span<const double> x) {
    std::lock_guard lock(mu_);
    std::vector<double> input(x.begin(), x.end());
    if (!to_child_ || !from_child_) throw SimulatorError("external simulator is not running", input);

    std::string line;
    char buf[32];
    for (std::size_t i = 0; i < x.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", x[i]);
      if (i) line += ' ';
      line += buf;
    }
    line += '\n';
    if (std::fputs(line.c_str(), to_child_) == EOF || std::fflush(to_child_) == EOF) {
      fail("external simulator: write failed (process exited?)", input);
    }

    std::string resp;
    int c;
    while ((c = std::fgetc(from_child_)) != EOF && c != '\n') resp.push_back(static_cast<char>(c));
    if (c == EOF && resp.empty()) fail("external simulator: no response (process exited)", input);
    while (!resp.empty() && (resp.back() == '\r' || resp.back() == ' ' || resp.back() == '\t')) resp.pop_back();
    std::size_t first = resp.find_first_not_of(" \t");
    if (first == std::string::npos) fail("external simulator: empty response line", input);
    resp.erase(0, first);

    double v = 0.0;
    auto [ptr, ec] = std::from_chars(resp.data(), resp.data() + resp.size(), v);
    if (ec != std::errc() || ptr != resp.data() + resp.size()) {
      fail("external simulator: malformed response '" + resp + "'", input);
    }
    return v;
  }

  /// Wraps this process as a copyable Simulator (shared ownership).
  static std::function<double(std::span<const double>)> make(std::string path,
                                                             std::vector<std::string> args = {}) {
    auto sim = std::make_shared<ExternalSimulator>(std::move(path), std::move(args));
    return [sim](std::span<const double> x) { return (*sim)(x); };
  }

 private:
  [[noreturn]] void fail(const std::string& msg, const std::vector<double>& input) {
    stop();
    throw SimulatorError(msg, input);
  }

  void start() {
    int in_pipe[2], out_pipe[2];
    if (pipe(in_pipe) != 0) throw SimulatorError("external simulator: pipe() failed");
    if (pipe(out_pipe) != 0) {
      close(in_pipe[0]);
      close(in_pipe[1]);
      throw SimulatorError("external simulator: pipe() failed");
    }
    std::signal(SIGPIPE, SIG_IGN);
    pid_ = fork();
    if (pid_ < 0) throw SimulatorError("external simulator: fork() failed");
    if (pid_ == 0) {
      dup2(in_pipe[0], STDIN_FILENO);
      dup2(out_pipe[1], STDOUT_FILENO);
      close(in_pipe[0]);
      close(in_pipe[1]);
      close(out_pipe[0]);
      close(out_pipe[1]);
      std::vector<char*> argv;
      argv.push_back(path_.data());
      for (auto& a : args_) argv.push_back(a.data());
      argv.push_back(nullptr);
      execvp(path_.c_str(), argv.data());
      _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    to_child_ = fdopen(in_pipe[1], "w");
    from_child_ = fdopen(out_pipe[0], "r");
  }

  void stop() {
    if (to_child_) {
      std::fclose(to_child_);
      to_child_ = nullptr;
    }
    if (from_child_) {
      std::fclose(from_child_);
      from_child_ = nullptr;
    }
    if (pid_ > 0) {
      int status = 0;
      waitpid(pid_, &status, 0);
      pid_ = -1;
    }
  }

  std::string path_;
  std::vector<std::string> args_;
  std::mutex mu_;
  pid_t pid_ = -1;
  FILE* to_child_ = nullptr;
  FILE* from_child_ = nullptr;
};

}  // namespace bal

#endif  // BAL_EXTERNAL_SIMULATOR_HPP
