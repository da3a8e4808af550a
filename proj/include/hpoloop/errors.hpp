#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace hpoloop {

// Base of every error raised by the library. `code()` is a stable
// machine-readable identifier printed by the CLI.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define HPOLOOP_DEFINE_ERROR(Name, Code)                                   \
  class Name : public Error {                                              \
   public:                                                                 \
    explicit Name(const std::string& message) : Error(Code, message) {}    \
  };

// search space / configs
HPOLOOP_DEFINE_ERROR(SchemaError, "schema_error")
HPOLOOP_DEFINE_ERROR(TemplateError, "template_error")

// llm client
HPOLOOP_DEFINE_ERROR(NetworkError, "network_error")
HPOLOOP_DEFINE_ERROR(TranscriptExhausted, "transcript_exhausted")
HPOLOOP_DEFINE_ERROR(MalformedResponse, "malformed_response")

// agents
HPOLOOP_DEFINE_ERROR(StepBudgetExceeded, "step_budget_exceeded")
HPOLOOP_DEFINE_ERROR(ProposalError, "proposal_error")
HPOLOOP_DEFINE_ERROR(EmptyLog, "empty_log")

// executor / tasks
HPOLOOP_DEFINE_ERROR(FileMissing, "file_missing")
HPOLOOP_DEFINE_ERROR(LogParseError, "log_parse_error")
HPOLOOP_DEFINE_ERROR(TimeoutError, "timeout")
HPOLOOP_DEFINE_ERROR(OutOfBounds, "out_of_bounds")
HPOLOOP_DEFINE_ERROR(DivergenceDetected, "divergence_detected")
HPOLOOP_DEFINE_ERROR(TrialFailed, "trial_failed")

// experiment log
HPOLOOP_DEFINE_ERROR(IndexMismatch, "index_mismatch")
HPOLOOP_DEFINE_ERROR(IoError, "io_error")
HPOLOOP_DEFINE_ERROR(FormatVersionMismatch, "format_version_mismatch")

// harness
HPOLOOP_DEFINE_ERROR(PlanError, "plan_error")
HPOLOOP_DEFINE_ERROR(RunAborted, "run_aborted")
HPOLOOP_DEFINE_ERROR(ExperimentFailed, "experiment_failed")
HPOLOOP_DEFINE_ERROR(MilestoneMismatch, "milestone_mismatch")

#undef HPOLOOP_DEFINE_ERROR

class ApiError : public Error {
 public:
  ApiError(int status, std::string body_excerpt)
      : Error("api_error", "HTTP " + std::to_string(status) + ": " + body_excerpt),
        status_(status),
        body_excerpt_(std::move(body_excerpt)) {}
  int status() const noexcept { return status_; }
  const std::string& body_excerpt() const noexcept { return body_excerpt_; }
  bool retryable() const noexcept { return status_ == 429 || status_ >= 500; }

 private:
  int status_;
  std::string body_excerpt_;
};

class NonZeroExit : public Error {
 public:
  NonZeroExit(int exit_code, std::string output_excerpt)
      : Error("nonzero_exit",
              "command exited with code " + std::to_string(exit_code)),
        exit_code_(exit_code),
        output_excerpt_(std::move(output_excerpt)) {}
  int exit_code() const noexcept { return exit_code_; }
  const std::string& output_excerpt() const noexcept { return output_excerpt_; }

 private:
  int exit_code_;
  std::string output_excerpt_;
};

// Parse failure at a known byte offset of the input document.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t byte_offset)
      : Error("parse_error",
              message + " (at byte " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

struct Violation {
  std::string name;
  std::string value;       // rendered offending value, empty when missing
  std::string constraint;  // what was expected
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  std::vector<Violation> violations_;
};

}  // namespace hpoloop
