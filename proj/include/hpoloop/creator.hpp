#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hpoloop/experiment_log.hpp"
#include "hpoloop/llm_client.hpp"
#include "hpoloop/react.hpp"
#include "hpoloop/search_space.hpp"

namespace hpoloop {

inline constexpr std::string_view kLoadHistoricalLogsTool = "LoadHistoricalTrainingLogs";

// Separate from the verbatim template; sent as a leading system message.
extern const std::string_view kCreatorJsonInstruction;
// Opening of the final-analysis request; the mock backend keys on it.
extern const std::string_view kAnalysisRequestMarker;
extern const std::string_view kEmptyLogSentinel;

struct OptimizationGoal {
  std::string metric_name;
  Direction direction = Direction::maximize;
  std::string goal_text;
};

struct BackgroundInfo {
  std::string model_info;
  std::string dataset_info;
  OptimizationGoal goal;
  std::string hp_info;

  // Throws SchemaError naming every empty section.
  void check() const;
};

BackgroundInfo make_background(std::string model_info, std::string dataset_info,
                               OptimizationGoal goal, const SearchSpace& space,
                               DescribeOptions options = {});

// The creator template with every placeholder but {agent_scratchpad} filled.
// Throws TemplateError on an empty section.
std::string build_creator_prompt(const BackgroundInfo& background,
                                 const std::vector<std::string>& tool_names = {
                                     std::string(kLoadHistoricalLogsTool)});

enum class LogView { full, opro };

std::string_view to_string(LogView v);

// Full view: every entry with config, rationale, trajectory, analysis and
// score. OPRO view: (config, score) pairs only, best last.
std::string render_log_for_creator(const ExperimentLog& log, LogView view);

struct Proposal {
  HyperparameterConfig config;
  std::string rationale;
  int attempts = 1;
  bool repaired = false;
};

struct CreatorContext {
  ChatSession* session = nullptr;
  CompletionParams params;  // temperature 1 by default
  LoopLimits limits;
  BackgroundInfo background;
  LogView view = LogView::full;
};

// Assignments found in a Final Answer: a fenced or bare JSON object first,
// otherwise "name: value" lines for known HP names. Values keep whatever
// type they parse as; validation happens afterwards.
std::optional<HyperparameterConfig> extract_config(std::string_view text, const SearchSpace& space);
// The Final Answer with the assignments removed.
std::string strip_assignments(std::string_view text, const SearchSpace& space);

// Deterministic fix-up of an invalid or duplicate proposal: fill missing
// HPs, resample bad choices, clamp numbers, then resample HPs in declaration
// order until the config differs from every logged one.
HyperparameterConfig repair_proposal(const HyperparameterConfig& proposal,
                                     const SearchSpace& space, const ExperimentLog& log, Rng& rng);

bool is_duplicate(const HyperparameterConfig& config, const ExperimentLog& log);

// One proposal from the Creator agent. Throws ProposalError.
Proposal create(const ExperimentLog& log, const SearchSpace& space, const CreatorContext& ctx,
                Rng& rng);

std::string build_analysis_prompt(const BackgroundInfo& background, const ExperimentLog& log,
                                  LogView view);

// Final analysis of a finished run. The best config is computed from the log; the backend writes
// the prose. Throws EmptyLog when no trial succeeded.
FinalAnalysis analyze(const ExperimentLog& log, const SearchSpace& space,
                      const CreatorContext& ctx);

// Final analysis for strategies without an LLM.
FinalAnalysis local_final_analysis(const ExperimentLog& log);

}  // namespace hpoloop
