#include "hpoloop/executor.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "hpoloop/errors.hpp"
#include "hpoloop/templates.hpp"
#include "hpoloop/text_util.hpp"

namespace hpoloop {

std::string tool_load_configs(const ExecutorEnv& env) { return read_file(env.config_path); }

namespace {

// Models often wrap JSON in a markdown fence.
std::string strip_fence(std::string_view input) {
  std::string s = trim(input);
  if (s.starts_with("```")) {
    const auto nl = s.find('\n');
    const auto end = s.rfind("```");
    if (nl != std::string::npos && end != std::string::npos && end > nl)
      s = trim(std::string_view(s).substr(nl + 1, end - nl - 1));
  }
  return s;
}

std::string format_series(const std::vector<double>& v) {
  std::vector<std::string> parts;
  parts.reserve(v.size());
  for (double x : v) parts.push_back(format_number(x));
  return "[" + join(parts, ", ") + "]";
}

}  // namespace

std::string tool_write_configs(const ExecutorEnv& env, std::string_view input,
                               const SearchSpace& space) {
  const std::string text = strip_fence(input);
  json patch;
  try {
    patch = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("WriteConfigs input is not valid JSON", e.byte);
  }
  if (!patch.is_object()) throw ParseError("WriteConfigs input must be a JSON object", 0);

  HyperparameterConfig merged;
  if (std::filesystem::exists(env.config_path)) {
    const std::string existing = read_file(env.config_path);
    if (!trim(existing).empty()) {
      try {
        merged = config_from_json(json::parse(existing));
      } catch (const json::parse_error& e) {
        throw ParseError("existing config file is not valid JSON", e.byte);
      }
    }
  }
  std::vector<std::string> changed;
  for (const auto& [key, value] : patch.items()) {
    HpValue v;
    const HyperparameterSpec* spec = space.find(key);
    if (auto c = spec ? coerce_json_value(*spec, value) : std::nullopt) {
      v = *c;
    } else {
      try {
        v = value_from_json(value);
      } catch (const SchemaError&) {
        throw ValidationError({{key, value.dump(), "a number or string"}});
      }
    }
    const HpValue* old = merged.get(key);
    if (!old || !value_equal(*old, v) || old->index() != v.index()) changed.push_back(key);
    merged.assignments[key] = v;
  }
  merged = validate_config(space, merged, ValidationMode::reject);
  write_file_atomic(env.config_path, config_to_json(merged).dump() + "\n");
  return "Configs written to " + env.config_path.filename().string() + ". Changed keys: " +
         (changed.empty() ? std::string("none") : join(changed, ", ")) + ".";
}

std::string tool_execute_training(const ExecutorEnv& env) {
  const std::string tail = launch_training(env);
  std::string out = "training completed";
  if (!trim(tail).empty()) out += "\n" + tail;
  return out;
}

std::string display_name(std::string_view series) {
  std::string out;
  bool start = true;
  for (char c : series) {
    if (c == '_') {
      out += ' ';
      start = true;
    } else {
      out += start ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c;
      start = false;
    }
  }
  return out;
}

std::string render_trajectory(const TrainingTrajectory& t, const std::string& goal_metric) {
  std::vector<std::string> epochs;
  for (auto e : t.epochs) epochs.push_back(std::to_string(e));
  std::string out = "Epoch: [" + join(epochs, ", ") + "]\n";
  for (const auto& [name, series] : t.metrics) out += display_name(name) + ": " + format_series(series) + "\n";
  out += "Total Training Time: " + format_number(t.total_time_s) + "s\n";
  out += "Final " + display_name(goal_metric) + ": " + format_number(t.final_metric);
  return out;
}

std::string tool_load_training_logs(const ExecutorEnv& env) {
  return render_trajectory(load_training_log(env.train_log_path, env.goal_metric), env.goal_metric);
}

// ---------------------------------------------------------------------------
// summary

namespace {

const std::vector<double>* series(const TrainingTrajectory& t, const std::string& name) {
  auto it = t.metrics.find(name);
  return it == t.metrics.end() || it->second.empty() ? nullptr : &it->second;
}

std::string training_counterpart(const std::string& goal) {
  if (goal.starts_with("val_")) return "train_" + goal.substr(4);
  if (goal.starts_with("validation_")) return "train_" + goal.substr(11);
  return "";
}

std::size_t window_size(std::size_t n) { return std::max<std::size_t>(2, (n + 2) / 3); }

}  // namespace

TrajectoryFlags trajectory_flags(const TrainingTrajectory& t, const std::string& goal_metric,
                                 Direction direction, const SummaryThresholds& th) {
  TrajectoryFlags flags;
  const auto* val = series(t, goal_metric);
  if (val && val->size() >= 2) {
    const std::size_t n = val->size();
    const std::size_t w = std::min(n, window_size(n));
    const auto first = val->end() - static_cast<std::ptrdiff_t>(w);

    // Overfitting: training keeps improving across the window while the
    // validation value ends clearly worse than its peak.
    if (const auto* train = series(t, training_counterpart(goal_metric));
        train && train->size() == n) {
      const double train_start = (*train)[n - w];
      const double train_end = train->back();
      const bool train_improves = better(direction, train_end, train_start);
      const double peak = direction == Direction::maximize
                              ? *std::max_element(val->begin(), val->end())
                              : *std::min_element(val->begin(), val->end());
      const double final_v = val->back();
      const double drop = direction == Direction::maximize ? peak - final_v : final_v - peak;
      flags.overfitting = train_improves && drop > th.overfit_relative * std::abs(peak);
    }

    const auto [lo, hi] = std::minmax_element(first, val->end());
    flags.plateau = (*hi - *lo) < th.plateau_absolute;
  }
  if (const auto* loss = series(t, "train_loss"); loss && loss->size() >= 2) {
    flags.non_convergence = loss->back() > th.nonconvergence_ratio * loss->front();
  }
  return flags;
}

std::string summarize_trajectory(const TrainingTrajectory& t, const std::string& goal_metric,
                                 Direction direction, const SummaryThresholds& th) {
  std::string out = "Final " + goal_metric + ": " + format_number(t.final_metric);
  if (const auto* val = series(t, goal_metric)) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < val->size(); ++i) {
      if (better(direction, (*val)[i], (*val)[best])) best = i;
    }
    const auto epoch = best < t.epochs.size() ? t.epochs[best] : static_cast<std::int64_t>(best);
    out += ". Best " + goal_metric + ": " + format_number((*val)[best]) + " at epoch " +
           std::to_string(epoch) + " of " + std::to_string(val->size()) + " recorded epochs.";
  } else {
    out += ".";
  }
  const auto flags = trajectory_flags(t, goal_metric, direction, th);
  if (flags.overfitting)
    out += " Overfitting: the training metric improved over the last third of training while "
           "validation ended more than " + format_number(th.overfit_relative * 100) +
           "% below its peak.";
  if (flags.non_convergence)
    out += " Non-convergence: the final training loss is above " +
           format_number(th.nonconvergence_ratio * 100) + "% of its initial value.";
  if (flags.plateau)
    out += " Plateau: validation moved by less than " + format_number(th.plateau_absolute) +
           " over the last third of training.";
  if (!flags.overfitting && !flags.non_convergence && !flags.plateau) out += " No warning flags.";
  return out;
}

// ---------------------------------------------------------------------------
// execute

std::string_view to_string(ExecutorMode m) { return m == ExecutorMode::agentic ? "agentic" : "direct"; }

ExecutorMode executor_mode_from_string(std::string_view s) {
  if (s == "agentic") return ExecutorMode::agentic;
  if (s == "direct") return ExecutorMode::direct;
  throw SchemaError("executor mode must be 'agentic' or 'direct', got '" + std::string(s) + "'");
}

CompletionParams default_executor_params() {
  CompletionParams p;
  p.temperature = 0.0;
  return p;
}

std::string executor_task_text(const HyperparameterConfig& config) {
  return "Write these hyper-parameters into the config file, run the training, then load and "
         "analyze the training logs: " + config_to_text(config);
}

std::string build_executor_prompt(const std::string& task_text) {
  const std::string tool_names = std::string(kLoadConfigsTool) + ", " +
                                 std::string(kWriteConfigsTool) + ", " +
                                 std::string(kExecuteTool) + ", " +
                                 std::string(kLoadTrainingLogsTool);
  return render_template(kExecutorTemplate, {{"tool_names", tool_names}, {"task_name", task_text}},
                         {"agent_scratchpad"});
}

namespace {

std::string error_text(const Error& e) { return e.code() + ": " + e.what(); }

TrialResult failed(std::string error) {
  TrialResult r;
  r.status = TrialStatus::failed;
  r.error = std::move(error);
  return r;
}

TrialResult finish(const ExecutorEnv& env, const SearchSpace& space,
                   const HyperparameterConfig& config, std::string analysis) {
  const auto on_disk = config_from_json(json::parse(read_file(env.config_path)));
  if (!(validate_config(space, on_disk) == config))
    return failed("config_mismatch: the config file does not hold the requested config");
  TrialResult r;
  r.trajectory = load_training_log(env.train_log_path, env.goal_metric);
  r.status = TrialStatus::succeeded;
  r.final_score = r.trajectory->final_metric;
  r.analysis_text = std::move(analysis);
  return r;
}

ToolRegistry executor_tools(const ExecutorEnv& env, const SearchSpace& space,
                            std::optional<std::string>& training_error) {
  ToolRegistry tools;
  auto guard = [](auto&& fn) {
    return [fn](std::string_view input) -> std::string {
      try {
        return fn(input);
      } catch (const ValidationError& e) {
        std::vector<std::string> parts;
        for (const auto& v : e.violations())
          parts.push_back(v.name + "=" + (v.value.empty() ? "<missing>" : v.value) + " (expected " +
                          v.constraint + ")");
        throw ToolError("invalid configs: " + join(parts, "; "));
      } catch (const ToolError&) {
        throw;
      } catch (const Error& e) {
        throw ToolError(error_text(e));
      }
    };
  };
  tools.add({std::string(kLoadConfigsTool), "Load the model training configs.",
             guard([&env](std::string_view) { return tool_load_configs(env); })});
  tools.add({std::string(kWriteConfigsTool), "Write changed configs (JSON).",
             guard([&env, &space](std::string_view in) { return tool_write_configs(env, in, space); })});
  tools.add({std::string(kExecuteTool), "Run the training command.",
             guard([&env, &training_error](std::string_view) {
               try {
                 std::filesystem::remove(env.train_log_path);
                 auto out = tool_execute_training(env);
                 training_error.reset();
                 return out;
               } catch (const NonZeroExit& e) {
                 training_error = error_text(e);
                 throw ToolError(error_text(e) + "\n" + e.output_excerpt());
               } catch (const Error& e) {
                 training_error = error_text(e);
                 throw;
               }
             })});
  tools.add({std::string(kLoadTrainingLogsTool), "Load the training logs.",
             guard([&env](std::string_view) { return tool_load_training_logs(env); })});
  return tools;
}

}  // namespace

TrialResult execute(const HyperparameterConfig& config, const ExecutorEnv& env,
                    const SearchSpace& space, Direction direction, ExecutorMode mode,
                    const AgentContext* agent, const SummaryThresholds& th) {
  env.check();
  validate_config(space, config);
  std::filesystem::create_directories(env.workdir);
  std::filesystem::remove(env.train_log_path);

  if (mode == ExecutorMode::direct) {
    try {
      tool_write_configs(env, config_to_json(config).dump(), space);
      tool_execute_training(env);
      const auto traj = load_training_log(env.train_log_path, env.goal_metric);
      return finish(env, space, config, summarize_trajectory(traj, env.goal_metric, direction, th));
    } catch (const NonZeroExit& e) {
      return failed(error_text(e) + "\n" + e.output_excerpt());
    } catch (const ApiError&) {
      throw;
    } catch (const Error& e) {
      return failed(error_text(e));
    }
  }

  if (!agent || !agent->session) throw SchemaError("agentic execution needs a chat session");
  if (!std::filesystem::exists(env.config_path)) write_file_atomic(env.config_path, "{}\n");
  std::optional<std::string> training_error;
  const ToolRegistry tools = executor_tools(env, space, training_error);
  const PromptFrame frame{"", build_executor_prompt(executor_task_text(config))};
  AgentOutcome outcome;
  try {
    outcome = run_loop(*agent->session, agent->params, frame, "", tools, agent->limits);
  } catch (const StepBudgetExceeded& e) {
    return failed(error_text(e));
  }
  if (training_error) return failed(*training_error);
  try {
    return finish(env, space, config, outcome.final_answer);
  } catch (const Error& e) {
    return failed(error_text(e));
  } catch (const json::exception& e) {
    return failed(std::string("config_mismatch: ") + e.what());
  }
}

}  // namespace hpoloop
