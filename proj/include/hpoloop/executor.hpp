#pragma once

#include <string>
#include <string_view>

#include "hpoloop/experiment_log.hpp"
#include "hpoloop/llm_client.hpp"
#include "hpoloop/react.hpp"
#include "hpoloop/search_space.hpp"
#include "hpoloop/trial_runner.hpp"

namespace hpoloop {

inline constexpr std::string_view kLoadConfigsTool = "LoadConfigs";
inline constexpr std::string_view kWriteConfigsTool = "WriteConfigs";
inline constexpr std::string_view kExecuteTool = "ExecutePythonFile";
inline constexpr std::string_view kLoadTrainingLogsTool = "LoadTrainingLogs";

// Returns the config file verbatim. Throws FileMissing.
std::string tool_load_configs(const ExecutorEnv& env);

// Merges a JSON object over the existing config, validates the result in
// reject mode and writes it atomically. Throws ParseError or ValidationError.
std::string tool_write_configs(const ExecutorEnv& env, std::string_view input,
                               const SearchSpace& space);

// Runs the training command (or builtin launcher). Throws TimeoutError or
// NonZeroExit.
std::string tool_execute_training(const ExecutorEnv& env);

// Renders the training log as "Epoch: [...]", one line per series, total
// time and final metric. Throws FileMissing or LogParseError.
std::string tool_load_training_logs(const ExecutorEnv& env);

std::string render_trajectory(const TrainingTrajectory& t, const std::string& goal_metric);
// "val_acc" -> "Val Acc".
std::string display_name(std::string_view series);

struct SummaryThresholds {
  // Validation must fall more than this fraction below its peak.
  double overfit_relative = 0.01;
  // Final training loss above this fraction of the initial one.
  double nonconvergence_ratio = 0.9;
  // Validation range over the window below this absolute amount.
  double plateau_absolute = 0.001;
};

struct TrajectoryFlags {
  bool overfitting = false;
  bool non_convergence = false;
  bool plateau = false;
};

TrajectoryFlags trajectory_flags(const TrainingTrajectory& t, const std::string& goal_metric,
                                 Direction direction, const SummaryThresholds& th = {});
std::string summarize_trajectory(const TrainingTrajectory& t, const std::string& goal_metric,
                                 Direction direction, const SummaryThresholds& th = {});

enum class ExecutorMode { agentic, direct };

std::string_view to_string(ExecutorMode m);
ExecutorMode executor_mode_from_string(std::string_view s);

struct AgentContext {
  ChatSession* session = nullptr;
  CompletionParams params;
  LoopLimits limits;
};

// Default Executor completion settings: temperature 0.
CompletionParams default_executor_params();

std::string build_executor_prompt(const std::string& task_text);
std::string executor_task_text(const HyperparameterConfig& config);

// One trial. Trial-level failures (timeout, non-zero exit, divergence,
// malformed log, agent budget) come back as a failed TrialResult; backend
// errors propagate.
TrialResult execute(const HyperparameterConfig& config, const ExecutorEnv& env,
                    const SearchSpace& space, Direction direction, ExecutorMode mode,
                    const AgentContext* agent = nullptr, const SummaryThresholds& th = {});

}  // namespace hpoloop
