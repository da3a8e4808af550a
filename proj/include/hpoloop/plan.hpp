#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hpoloop/creator.hpp"
#include "hpoloop/executor.hpp"
#include "hpoloop/llm_client.hpp"
#include "hpoloop/search_space.hpp"
#include "hpoloop/trial_runner.hpp"

namespace hpoloop {

struct StrategySpec {
  std::string name = "random";
  json params = json::object();
};

struct BackendConfig {
  std::optional<BackendSpec> spec;  // nullopt = no LLM configured
  std::string label = "none";       // as written: "http", "scripted:<path>", ...
  CompletionParams creator_params;  // temperature 1
  CompletionParams executor_params = default_executor_params();
  LoopLimits limits;
};

struct ExperimentPlan {
  TaskSpec task;
  SearchSpace space{{HyperparameterSpec{"x", HpKind::floating, false, 0.0, 1.0, {}, ""}}};
  std::string space_id = "inline";
  DescribeOptions describe;
  BackgroundInfo background;
  StrategySpec strategy;
  int trials_per_run = 10;
  int n_runs = 1;
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<int> milestones{1, 3, 5, 10};
  BackendConfig backend;
  ExecutorMode executor_mode = ExecutorMode::direct;
  std::chrono::milliseconds train_timeout{600'000};
  std::filesystem::path output_dir = "out";
  int workers = 1;
  bool resume = false;

  // Throws PlanError naming the first broken invariant.
  void check() const;
  bool needs_llm() const;
};

// Run seed i = splitmix64(master + (i + 1) * 0x9E3779B97F4A7C15). Adding runs
// never changes the seeds of existing ones.
std::uint64_t derive_run_seed(std::uint64_t master_seed, int run_index);
std::vector<std::uint64_t> derive_run_seeds(std::uint64_t master_seed, int n_runs);

// "http" | "scripted:<path>" | "mock:bisect-refine". Relative transcript
// paths resolve against `base_dir`.
BackendConfig parse_backend_label(const std::string& label, const std::filesystem::path& base_dir);

// Relative paths inside the plan resolve against `base_dir`.
ExperimentPlan parse_plan(const json& j, const std::filesystem::path& base_dir);
// Throws FileMissing ("plan not found"), PlanError, SchemaError.
ExperimentPlan load_plan(const std::filesystem::path& path);

struct PlanOverrides {
  std::optional<std::string> strategy;
  std::optional<int> trials;
  std::optional<int> runs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> backend;
  std::optional<std::string> mode;
  std::optional<std::filesystem::path> out;
  std::optional<int> workers;
};

// Flags win over the plan file. Re-checks the plan.
void apply_overrides(ExperimentPlan& plan, const PlanOverrides& o);

// Non-fatal findings, e.g. an external command that is not on PATH.
std::vector<std::string> plan_warnings(const ExperimentPlan& plan);

}  // namespace hpoloop
