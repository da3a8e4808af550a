#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hpoloop/search_space.hpp"
#include "hpoloop/trial_runner.hpp"
#include "hpoloop/values.hpp"

namespace hpoloop {

inline constexpr int kLogFormatVersion = 1;

enum class TrialStatus { succeeded, failed };

std::string_view to_string(TrialStatus s);

// L_t: outcome of one trial.
struct TrialResult {
  TrialStatus status = TrialStatus::failed;
  std::optional<double> final_score;  // present iff succeeded
  std::optional<TrainingTrajectory> trajectory;
  std::string analysis_text;
  std::string error;  // error code and message of a failed trial

  bool operator==(const TrialResult&) const = default;
};

struct LogEntry {
  int trial_index = 0;  // 1-based
  HyperparameterConfig config;
  std::string rationale;
  TrialResult result;
  std::string started_at;
  std::string finished_at;
  std::optional<std::string> transcript_ref;  // relative to the log file

  bool operator==(const LogEntry&) const = default;
};

struct FinalAnalysis {
  HyperparameterConfig best_config;
  int best_trial = 0;
  double best_score = 0.0;
  std::string best_reasoning;
  std::string influence_notes;
  std::string future_directions;

  bool operator==(const FinalAnalysis&) const = default;
};

struct RunMetadata {
  std::string task_id;
  std::string space_id;
  std::string strategy;
  std::uint64_t seed = 0;
  int run_index = 0;
  std::string goal_metric;
  Direction direction = Direction::maximize;
  std::string started_at;
  std::string finished_at;
  bool aborted = false;
  std::string abort_reason;

  bool operator==(const RunMetadata&) const = default;
};

// The memory block: an append-only list of [H_t, R_t, L_t] entries.
class ExperimentLog {
 public:
  RunMetadata metadata;
  std::optional<FinalAnalysis> final_analysis;

  ExperimentLog() = default;
  explicit ExperimentLog(RunMetadata meta) : metadata(std::move(meta)) {}

  const std::vector<LogEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  // With a backing file every append rewrites it before returning.
  void attach_file(std::filesystem::path path) { path_ = std::move(path); }
  const std::optional<std::filesystem::path>& file() const noexcept { return path_; }

  // Throws IndexMismatch unless entry.trial_index == size() + 1, IoError when
  // the backing file cannot be written.
  void append(LogEntry entry);
  // Writes the backing file, if any.
  void persist() const;

  bool operator==(const ExperimentLog& other) const {
    return metadata == other.metadata && final_analysis == other.final_analysis &&
           entries_ == other.entries_;
  }

 private:
  std::vector<LogEntry> entries_;
  std::optional<std::filesystem::path> path_;
};

json serialize_log(const ExperimentLog& log);
std::string serialize_log_text(const ExperimentLog& log);
// Throws ParseError (with byte offset), FormatVersionMismatch.
ExperimentLog deserialize_log(std::string_view text);
ExperimentLog load_log(const std::filesystem::path& path);

struct BestSoFar {
  double score = 0.0;
  int trial_index = 0;
};

// Best succeeded entry among trials 1..min(t, n); earliest wins ties.
std::optional<BestSoFar> best_so_far(const ExperimentLog& log, int t, Direction direction);

struct MilestoneRow {
  int t = 0;
  std::vector<std::optional<double>> values;  // one per run, nullopt = missing
  int n = 0;                                  // runs contributing
  int missing = 0;
  std::optional<double> mean;
  double sample_std = 0.0;
  bool single_run = false;

  bool operator==(const MilestoneRow&) const = default;
};

struct MilestoneReport {
  std::string strategy;
  Direction direction = Direction::maximize;
  std::vector<int> milestones;
  std::vector<MilestoneRow> rows;
  int run_count = 0;       // runs included
  int excluded_runs = 0;   // aborted runs left out
  std::vector<std::string> notes;

  bool operator==(const MilestoneReport&) const = default;
};

// Aborted runs are counted in excluded_runs and contribute no values.
MilestoneReport milestone_report(std::span<const ExperimentLog> runs,
                                 const std::vector<int>& milestones, Direction direction);

json report_to_json(const MilestoneReport& report);
MilestoneReport report_from_json(const json& j);
std::string format_report_table(const MilestoneReport& report);

// CSV columns: run,trial,score,best_so_far.
std::string trajectory_csv(std::span<const ExperimentLog> runs, Direction direction);

}  // namespace hpoloop
