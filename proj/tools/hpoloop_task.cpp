#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "hpoloop/errors.hpp"
#include "hpoloop/search_space.hpp"
#include "hpoloop/text_util.hpp"
#include "hpoloop/trial_runner.hpp"

using namespace hpoloop;

// Runs one builtin task as a separate process, following the same
// {config} / {log} contract an external trainer does.
int main(int argc, char** argv) {
  CLI::App app{"Builtin training task runner"};
  std::string task_path, space_path, config_path, log_path;
  std::uint64_t seed = 0;
  app.add_option("--task", task_path, "Task spec JSON file")->required();
  app.add_option("--space", space_path, "Search space file (default: the task's own space)");
  app.add_option("--config", config_path, "Hyperparameter config JSON")->required();
  app.add_option("--log", log_path, "Training log to write")->required();
  app.add_option("--seed", seed, "Noise seed");
  CLI11_PARSE(app, argc, argv);

  try {
    const TaskSpec task = parse_task_spec(json::parse(read_file(task_path)));
    if (task.kind == TaskKind::external) throw SchemaError("hpoloop-task only runs builtin tasks");
    SearchSpace space = space_path.empty()
                            ? (task.kind == TaskKind::convex2d
                                   ? convex2d_space(std::get<Convex2dParams>(task.params))
                                   : throw SchemaError("--space is required for this task kind"))
                            : load_search_space(space_path);
    ExecutorEnv env;
    env.config_path = config_path;
    env.train_log_path = log_path;
    env.goal_metric = task.goal_metric;
    builtin_launcher(task, space, seed)(env);
  } catch (const Error& e) {
    std::cerr << e.code() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
