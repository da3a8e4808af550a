#include "hpoloop/subprocess.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <deque>

#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "hpoloop/errors.hpp"

namespace hpoloop {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

namespace {

class TailBuffer {
 public:
  explicit TailBuffer(std::size_t max_lines) : max_lines_(max_lines) {}
  void feed(const char* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      if (data[i] == '\n') {
        push(std::move(current_));
        current_.clear();
      } else {
        current_ += data[i];
      }
    }
  }
  std::string str() {
    if (!current_.empty()) {
      push(std::move(current_));
      current_.clear();
    }
    std::string out;
    for (const auto& l : lines_) out += l + "\n";
    return out;
  }

 private:
  void push(std::string line) {
    lines_.push_back(std::move(line));
    while (lines_.size() > max_lines_) lines_.pop_front();
  }
  std::size_t max_lines_;
  std::deque<std::string> lines_;
  std::string current_;
};

}  // namespace

CommandOutcome run_command(const std::string& command, const std::filesystem::path& workdir,
                           std::chrono::milliseconds timeout, std::size_t tail_lines) {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) throw IoError(std::string("pipe failed: ") + std::strerror(errno));

  const std::string dir = workdir.string();
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(fds[0]);
    ::close(fds[1]);
    throw IoError(std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    // child: only async-signal-safe calls until exec
    ::setpgid(0, 0);
    ::dup2(fds[1], STDOUT_FILENO);
    ::dup2(fds[1], STDERR_FILENO);
    int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    if (!dir.empty() && ::chdir(dir.c_str()) != 0) ::_exit(126);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  ::close(fds[1]);

  TailBuffer tail(tail_lines);
  CommandOutcome outcome;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  bool eof = false;
  char buf[4096];
  while (!eof) {
    const auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      outcome.timed_out = true;
      break;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now);
    pollfd p{fds[0], POLLIN, 0};
    const int r = ::poll(&p, 1, static_cast<int>(std::min<long long>(left.count() + 1, 1000)));
    if (r < 0 && errno != EINTR) break;
    if (r > 0) {
      const ssize_t n = ::read(fds[0], buf, sizeof buf);
      if (n > 0) tail.feed(buf, static_cast<std::size_t>(n));
      else if (n == 0) eof = true;
      else if (errno != EINTR && errno != EAGAIN) eof = true;
    }
  }

  int status = 0;
  if (outcome.timed_out) {
    ::kill(-pid, SIGKILL);
    ::waitpid(pid, &status, 0);
    outcome.exit_code = -1;
  } else {
    // output closed; the shell may still be exiting
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (WIFEXITED(status)) outcome.exit_code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status)) outcome.exit_code = 128 + WTERMSIG(status);
  }
  ::close(fds[0]);
  outcome.output_tail = tail.str();
  return outcome;
}

}  // namespace hpoloop
