#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hpoloop/search_space.hpp"
#include "hpoloop/values.hpp"

namespace hpoloop {

// L_t (partial): per-epoch metric series of one training run.
struct TrainingTrajectory {
  std::vector<std::int64_t> epochs;
  std::map<std::string, std::vector<double>> metrics;
  double final_metric = 0.0;
  double total_time_s = 0.0;

  bool operator==(const TrainingTrajectory&) const = default;
};

// Training-log file: {"epochs", "metrics", "final_metric", "total_time_s"}.
json trajectory_to_json(const TrainingTrajectory& t);
// Throws LogParseError listing schema violations.
TrainingTrajectory trajectory_from_json(const json& j, const std::string& goal_metric = "");
// Empty when `j` satisfies the training-log contract. With a goal metric, the
// final_metric must equal that series' last element when the series exists.
std::vector<std::string> check_training_log(const json& j, const std::string& goal_metric = "");
// Throws FileMissing, LogParseError.
TrainingTrajectory load_training_log(const std::filesystem::path& path,
                                     const std::string& goal_metric = "");
void write_training_log(const std::filesystem::path& path, const TrainingTrajectory& t);

// Where a trial runs. One per run; concurrent runs use disjoint workdirs.
struct ExecutorEnv {
  std::filesystem::path workdir;
  std::filesystem::path config_path;
  std::filesystem::path train_log_path;
  // Shell template with {config} and {log}; empty when `launcher` is set.
  std::string train_command;
  std::chrono::milliseconds timeout{600'000};
  std::string goal_metric = "objective";
  // In-process trainer for builtin tasks. Reads the config file and writes the
  // training log, throwing on failure.
  std::function<void(const ExecutorEnv&)> launcher;

  // Throws SchemaError when a path escapes the workdir or timeout <= 0.
  void check() const;
  static ExecutorEnv in_dir(const std::filesystem::path& workdir);
};

enum class TaskKind { convex2d, synthetic_trainer, toy_classifier, external };

std::string_view to_string(TaskKind k);

struct Convex2dParams {
  double center_x = 2.0;
  double center_y = 3.0;
  double x_lower = -5.0, x_upper = 5.0;
  double y_lower = -5.0, y_upper = 5.0;
  std::string x_name = "x";
  std::string y_name = "y";
};

// One factor of the synthetic response surface. For numeric and ordinal HPs
// `target` is a position in the normalized [0, 1] coordinate; categorical HPs
// use `target_choice` and contribute distance 0 or 1.
struct SurfaceTerm {
  std::string hp;
  double target = 0.5;
  std::string target_choice;
  double width = 0.3;
};

struct SyntheticParams {
  double floor = 0.5;
  double ceiling = 0.9;
  double rate = 0.3;
  double overfit = 0.0;
  double noise = 0.0;
  int epochs = 30;
  std::vector<SurfaceTerm> terms;
};

struct ToyClassifierParams {
  std::uint64_t dataset_seed = 7;
  int size = 200;
  double separation = 1.0;
  // Multiplies the first feature; > 1 makes plain gradient descent
  // ill-conditioned so the step size and epoch count matter.
  double feature_scale = 10.0;
  // Used when the config does not set them.
  double learning_rate = 0.1;
  int epochs = 100;
  double l2_weight = 0.0;
  int batch_size = 0;  // 0 = full batch
};

struct ExternalParams {
  std::string command;
};

struct TaskSpec {
  TaskKind kind = TaskKind::convex2d;
  std::variant<Convex2dParams, SyntheticParams, ToyClassifierParams, ExternalParams> params;
  std::string goal_metric = "objective";
  Direction direction = Direction::minimize;
  // Record wall-clock time for builtin tasks. Off by default so that
  // training-log files stay byte-identical across repeated runs.
  bool measure_time = false;
  std::string id = "task";
};

// Throws SchemaError (or PlanError) naming the offending field.
TaskSpec parse_task_spec(const json& j);
json task_spec_to_json(const TaskSpec& t);
// Search space implied by a convex task: two floats over its bounds.
SearchSpace convex2d_space(const Convex2dParams& p);

// (x - a)^2 + (y - b)^2; throws OutOfBounds outside the task bounds.
double eval_convex2d(const Convex2dParams& p, double x, double y);
TrainingTrajectory run_convex2d(const Convex2dParams& p, const HyperparameterConfig& config);

// Closed form documented in docs/synthetic_trainer.md.
TrainingTrajectory run_synthetic_trainer(const SyntheticParams& p, const SearchSpace& space,
                                         const HyperparameterConfig& config, std::uint64_t seed);

// Logistic regression by mini-batch gradient descent on two seeded Gaussian
// blobs. Throws DivergenceDetected when the loss blows up.
TrainingTrajectory run_toy_classifier(const ToyClassifierParams& p,
                                      const HyperparameterConfig& config);

// Dispatches by kind. Builtin kinds write env.train_log_path themselves; the
// external kind runs the command. Returns the trajectory read back from file.
TrainingTrajectory run_task(const TaskSpec& task, const SearchSpace& space,
                            const HyperparameterConfig& config, const ExecutorEnv& env,
                            std::uint64_t seed);

// Runs the env's launcher, or its train command with {config} and {log}
// replaced by quoted paths. Returns the command's output tail. Throws
// TimeoutError or NonZeroExit.
std::string launch_training(const ExecutorEnv& env);

// Launcher that evaluates a builtin task in-process from env.config_path.
std::function<void(const ExecutorEnv&)> builtin_launcher(const TaskSpec& task,
                                                         const SearchSpace& space,
                                                         std::uint64_t seed);

}  // namespace hpoloop
