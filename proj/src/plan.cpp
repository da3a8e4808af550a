#include "hpoloop/plan.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>
#include <sstream>

#include "hpoloop/baselines.hpp"
#include "hpoloop/errors.hpp"
#include "hpoloop/text_util.hpp"

namespace hpoloop {

std::uint64_t derive_run_seed(std::uint64_t master_seed, int run_index) {
  return splitmix64(master_seed + static_cast<std::uint64_t>(run_index + 1) * 0x9E3779B97F4A7C15ULL);
}

std::vector<std::uint64_t> derive_run_seeds(std::uint64_t master_seed, int n_runs) {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < n_runs; ++i) out.push_back(derive_run_seed(master_seed, i));
  return out;
}

bool ExperimentPlan::needs_llm() const {
  return strategy.name == "agent" || strategy.name == "opro" ||
         executor_mode == ExecutorMode::agentic;
}

void ExperimentPlan::check() const {
  auto fail = [](const std::string& m) { throw PlanError(m); };
  if (trials_per_run < 1) fail("trials_per_run must be >= 1");
  if (n_runs < 1) fail("n_runs must be >= 1");
  if (workers < 1) fail("workers must be >= 1");
  if (static_cast<int>(seeds.size()) != n_runs)
    fail("seeds lists " + std::to_string(seeds.size()) + " values for " + std::to_string(n_runs) + " runs");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) fail("seeds must be unique");
  if (milestones.empty()) fail("milestones must not be empty");
  for (int m : milestones) {
    if (m < 1 || m > trials_per_run)
      fail("milestone " + std::to_string(m) + " is outside 1.." + std::to_string(trials_per_run));
  }
  if (train_timeout.count() <= 0) fail("train_timeout_s must be positive");
  if (needs_llm() && !backend.spec)
    fail("strategy '" + strategy.name + "' with executor mode '" + std::string(to_string(executor_mode)) +
         "' needs a backend");
  try {
    make_strategy(strategy.name, strategy.params);
    if (strategy.name == "agent" || strategy.name == "opro") background.check();
    backend.creator_params.check();
    backend.executor_params.check();
  } catch (const SchemaError& e) {
    fail(e.what());
  }
  if (task.kind == TaskKind::convex2d) {
    const auto& p = std::get<Convex2dParams>(task.params);
    if (!space.find(p.x_name) || !space.find(p.y_name))
      fail("the search space must define the convex task's " + p.x_name + " and " + p.y_name);
  }
}

BackendConfig parse_backend_label(const std::string& label, const std::filesystem::path& base_dir) {
  BackendConfig b;
  b.label = label;
  if (label == "none") return b;
  if (label == "http") {
    HttpBackendSpec h;
    if (const char* url = std::getenv(kBaseUrlOverrideEnv); url && *url) h.base_url = url;
    b.spec = h;
  } else if (label.starts_with("scripted:")) {
    std::filesystem::path p = label.substr(9);
    if (p.is_relative()) p = base_dir / p;
    b.spec = ScriptedBackendSpec{load_transcript_file(p.string())};
  } else if (label.starts_with("mock:")) {
    const std::string strategy = label.substr(5);
    if (strategy != "bisect-refine") throw SchemaError("unknown mock backend '" + strategy + "'");
    b.spec = ProgrammaticBackendSpec{strategy};
  } else {
    throw SchemaError("backend must be http, scripted:<path> or mock:bisect-refine, got '" + label + "'");
  }
  return b;
}

namespace {

const json* opt(const json& j, const char* key) { return j.contains(key) ? &j[key] : nullptr; }

std::string str(const json& j, const std::string& what) {
  if (!j.is_string()) throw PlanError(what + " must be a string");
  return j.get<std::string>();
}

int integer(const json& j, const std::string& what) {
  if (!j.is_number_integer()) throw PlanError(what + " must be an integer");
  return j.get<int>();
}

CompletionParams completion_from_json(const json& j, CompletionParams base, const std::string& what) {
  for (const auto& [key, value] : j.items()) {
    if (key == "model") base.model = str(value, what + ".model");
    else if (key == "temperature" && value.is_number()) base.temperature = value.get<double>();
    else if (key == "max_tokens") base.max_tokens = integer(value, what + ".max_tokens");
    else if (key == "request_timeout_s" && value.is_number())
      base.request_timeout = std::chrono::milliseconds(static_cast<long long>(value.get<double>() * 1000));
    else throw PlanError(what + "." + key + " is not a valid completion setting");
  }
  return base;
}

}  // namespace

ExperimentPlan parse_plan(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw PlanError("plan must be a JSON object");
  static const std::set<std::string> known{
      "task", "space", "space_path", "hide_bounds", "background", "strategy", "trials_per_run",
      "n_runs", "seeds", "master_seed", "milestones", "backend", "completion", "executor_completion",
      "executor_mode", "max_steps", "train_timeout_s", "output_dir", "workers", "resume"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw PlanError("unknown plan key '" + key + "'");
  }
  ExperimentPlan plan;
  if (!j.contains("task")) throw PlanError("plan.task is required");
  plan.task = parse_task_spec(j["task"]);

  if (j.contains("space") && j.contains("space_path")) throw PlanError("give either space or space_path, not both");
  if (const json* s = opt(j, "space")) {
    plan.space = parse_search_space(*s);
  } else if (const json* p = opt(j, "space_path")) {
    std::filesystem::path path = str(*p, "space_path");
    if (path.is_relative()) path = base_dir / path;
    plan.space = load_search_space(path.string());
    plan.space_id = path.stem().string();
  } else if (plan.task.kind == TaskKind::convex2d) {
    plan.space = convex2d_space(std::get<Convex2dParams>(plan.task.params));
    plan.space_id = "convex2d";
  } else {
    throw PlanError("plan needs space or space_path");
  }
  if (const json* h = opt(j, "hide_bounds")) {
    if (!h->is_boolean()) throw PlanError("hide_bounds must be a boolean");
    plan.describe.show_bounds = !h->get<bool>();
  }

  const json bg = j.value("background", json::object());
  if (!bg.is_object()) throw PlanError("background must be an object");
  for (const auto& [key, _] : bg.items()) {
    if (key != "model_info" && key != "dataset_info" && key != "goal" && key != "metric")
      throw PlanError("unknown background key '" + key + "'");
  }
  OptimizationGoal goal{bg.contains("metric") ? str(bg["metric"], "background.metric") : plan.task.goal_metric,
                        plan.task.direction,
                        bg.contains("goal") ? str(bg["goal"], "background.goal") : ""};
  plan.background = make_background(bg.contains("model_info") ? str(bg["model_info"], "background.model_info") : "",
                                    bg.contains("dataset_info") ? str(bg["dataset_info"], "background.dataset_info") : "",
                                    goal, plan.space, plan.describe);

  if (const json* s = opt(j, "strategy")) {
    if (s->is_string()) {
      plan.strategy.name = s->get<std::string>();
    } else if (s->is_object()) {
      plan.strategy.name = str(s->value("name", json()), "strategy.name");
      plan.strategy.params = s->value("params", json::object());
    } else {
      throw PlanError("strategy must be a name or {name, params}");
    }
  }
  if (const json* t = opt(j, "trials_per_run")) plan.trials_per_run = integer(*t, "trials_per_run");
  if (const json* n = opt(j, "n_runs")) plan.n_runs = integer(*n, "n_runs");
  if (const json* m = opt(j, "master_seed")) {
    if (!m->is_number_unsigned() && !m->is_number_integer()) throw PlanError("master_seed must be an integer");
    plan.master_seed = m->get<std::uint64_t>();
  }
  if (const json* s = opt(j, "seeds")) {
    if (!s->is_array()) throw PlanError("seeds must be an array of integers");
    for (const auto& v : *s) {
      if (!v.is_number_integer()) throw PlanError("seeds must be an array of integers");
      plan.seeds.push_back(v.get<std::uint64_t>());
    }
    if (!j.contains("n_runs")) plan.n_runs = static_cast<int>(plan.seeds.size());
  } else {
    plan.seeds = derive_run_seeds(plan.master_seed, plan.n_runs);
  }
  if (const json* m = opt(j, "milestones")) {
    if (!m->is_array()) throw PlanError("milestones must be an array of integers");
    plan.milestones.clear();
    for (const auto& v : *m) plan.milestones.push_back(integer(v, "milestones[]"));
  } else {
    plan.milestones.erase(std::remove_if(plan.milestones.begin(), plan.milestones.end(),
                                         [&](int t) { return t > plan.trials_per_run; }),
                          plan.milestones.end());
    if (plan.milestones.empty() || plan.milestones.back() != plan.trials_per_run)
      if (plan.trials_per_run < 10) plan.milestones.push_back(plan.trials_per_run);
  }
  if (const json* b = opt(j, "backend")) {
    try {
      plan.backend = parse_backend_label(str(*b, "backend"), base_dir);
    } catch (const SchemaError& e) {
      throw PlanError(e.what());
    } catch (const FileMissing& e) {
      throw PlanError(std::string("backend transcript: ") + e.what());
    }
  }
  if (const json* c = opt(j, "completion"))
    plan.backend.creator_params = completion_from_json(*c, plan.backend.creator_params, "completion");
  if (const json* c = opt(j, "executor_completion"))
    plan.backend.executor_params = completion_from_json(*c, plan.backend.executor_params, "executor_completion");
  if (const json* m = opt(j, "max_steps")) plan.backend.limits.max_steps = integer(*m, "max_steps");
  if (const json* m = opt(j, "executor_mode")) {
    try {
      plan.executor_mode = executor_mode_from_string(str(*m, "executor_mode"));
    } catch (const SchemaError& e) {
      throw PlanError(e.what());
    }
  }
  if (const json* t = opt(j, "train_timeout_s")) {
    if (!t->is_number()) throw PlanError("train_timeout_s must be a number");
    plan.train_timeout = std::chrono::milliseconds(static_cast<long long>(t->get<double>() * 1000));
  }
  if (const json* o = opt(j, "output_dir")) {
    std::filesystem::path p = str(*o, "output_dir");
    plan.output_dir = p.is_relative() ? base_dir / p : p;
  } else {
    plan.output_dir = base_dir / "out";
  }
  if (const json* w = opt(j, "workers")) plan.workers = integer(*w, "workers");
  if (const json* r = opt(j, "resume")) {
    if (!r->is_boolean()) throw PlanError("resume must be a boolean");
    plan.resume = r->get<bool>();
  }
  plan.check();
  return plan;
}

ExperimentPlan load_plan(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw FileMissing("plan not found: " + path.string());
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + " is not valid JSON: " + e.what(), e.byte);
  }
  return parse_plan(j, path.parent_path());
}

void apply_overrides(ExperimentPlan& plan, const PlanOverrides& o) {
  if (o.strategy) plan.strategy = StrategySpec{*o.strategy, json::object()};
  if (o.trials) {
    plan.trials_per_run = *o.trials;
    plan.milestones.erase(std::remove_if(plan.milestones.begin(), plan.milestones.end(),
                                         [&](int t) { return t > plan.trials_per_run; }),
                          plan.milestones.end());
    if (plan.milestones.empty()) plan.milestones.push_back(plan.trials_per_run);
  }
  if (o.seed) plan.master_seed = *o.seed;
  if (o.runs) plan.n_runs = *o.runs;
  if (o.seed || o.runs) {
    if (!o.seed && static_cast<int>(plan.seeds.size()) >= plan.n_runs) plan.seeds.resize(plan.n_runs);
    else plan.seeds = derive_run_seeds(plan.master_seed, plan.n_runs);
  }
  if (o.backend) plan.backend = parse_backend_label(*o.backend, std::filesystem::current_path());
  if (o.mode) plan.executor_mode = executor_mode_from_string(*o.mode);
  if (o.out) plan.output_dir = *o.out;
  if (o.workers) plan.workers = *o.workers;
  plan.check();
}

std::vector<std::string> plan_warnings(const ExperimentPlan& plan) {
  std::vector<std::string> out;
  if (plan.task.kind == TaskKind::external) {
    const std::string& cmd = std::get<ExternalParams>(plan.task.params).command;
    std::istringstream is(cmd);
    std::string program;
    is >> program;
    bool found = program.find('/') != std::string::npos && std::filesystem::exists(program);
    if (!found && program.find('/') == std::string::npos) {
      const char* path = std::getenv("PATH");
      std::istringstream dirs(path ? path : "");
      std::string dir;
      while (std::getline(dirs, dir, ':')) {
        if (!dir.empty() && std::filesystem::exists(std::filesystem::path(dir) / program)) {
          found = true;
          break;
        }
      }
    }
    if (!found) out.push_back("external command '" + program + "' was not found; it must exist when the plan runs");
  }
  return out;
}

}  // namespace hpoloop
