#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hpoloop/experiment_log.hpp"
#include "hpoloop/llm_client.hpp"
#include "hpoloop/plan.hpp"

namespace hpoloop {

// output_dir/runs/run_XXX
std::filesystem::path run_directory(const ExperimentPlan& plan, int run_index);

// The optimization loop for one run: propose, execute, append; then the final
// analysis. The log is written after every trial. A backend failure marks
// the log aborted and returns it.
ExperimentLog run_single(const ExperimentPlan& plan, int run_index, const ChatBackend* backend);

enum class RunPolicy { parallel, serial };

struct ExperimentResult {
  MilestoneReport report;
  std::vector<ExperimentLog> logs;  // in run order
};

// Runs every seed, aggregates milestones and writes report.json, report.txt
// and trajectories.csv. Throws ExperimentFailed when every run aborted.
// The serial policy is the reference the parallel one is tested against.
ExperimentResult run_experiment(const ExperimentPlan& plan, RunPolicy policy = RunPolicy::parallel,
                                const ChatBackend* backend = nullptr);

// Loads every runs/*/run_log.json below `dir`, in run order.
std::vector<ExperimentLog> load_run_logs(const std::filesystem::path& dir);
// Recomputes the report from persisted logs. Milestones default to the ones
// in dir/report.json when present, else {1, 3, 5, 10} capped at the trials.
MilestoneReport report_from_dir(const std::filesystem::path& dir,
                                std::optional<std::vector<int>> milestones = std::nullopt);

struct ComparisonTable {
  std::vector<std::string> strategies;
  std::vector<int> milestones;
  Direction direction = Direction::maximize;
  // cells[row][column]: (mean, std) or nullopt when no run reached t
  std::vector<std::vector<std::optional<std::pair<double, double>>>> cells;
  std::vector<std::optional<std::size_t>> best_column;
};

// Throws MilestoneMismatch when milestones or directions differ.
ComparisonTable compare(const std::vector<std::pair<std::string, MilestoneReport>>& reports);
std::string format_comparison(const ComparisonTable& table);
json comparison_to_json(const ComparisonTable& table);

}  // namespace hpoloop
