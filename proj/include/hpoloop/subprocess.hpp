#pragma once

#include <chrono>
#include <filesystem>
#include <string>

namespace hpoloop {

struct CommandOutcome {
  int exit_code = 0;
  bool timed_out = false;
  // Last `tail_lines` lines of merged stdout/stderr.
  std::string output_tail;
};

// Runs `command` through /bin/sh in `workdir` with stdout and stderr merged.
// On timeout the whole process group is killed.
CommandOutcome run_command(const std::string& command, const std::filesystem::path& workdir,
                           std::chrono::milliseconds timeout, std::size_t tail_lines = 100);

// POSIX single-quote escaping for substitution into a shell command.
std::string shell_quote(const std::string& s);

}  // namespace hpoloop
