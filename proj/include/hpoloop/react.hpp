#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hpoloop/errors.hpp"
#include "hpoloop/llm_client.hpp"

namespace hpoloop {

// One Thought/Action/Action Input/Observation block.
struct ReActStep {
  std::string thought;
  std::string action;
  std::string action_input;
  std::string observation;  // filled after dispatch

  bool operator==(const ReActStep&) const = default;
};

struct FinalAnswer {
  std::string text;
  std::string thought;  // reasoning that preceded the answer, possibly empty
};

struct ParseFailure {
  std::string reason;
};

using ParsedBlock = std::variant<ReActStep, FinalAnswer, ParseFailure>;

// Recognizes line-anchored (leading whitespace allowed), case-sensitive
// markers. "Final Answer:" anywhere wins; otherwise "Action:" and
// "Action Input:" are required. The action input runs to the end of the text
// or to a hallucinated "Observation:" line.
ParsedBlock parse_block(std::string_view text);

// Inverse of parse_block for a step without observation.
std::string format_step(const ReActStep& step);

// Raised by tool handlers; the message becomes the observation text.
class ToolError : public Error {
 public:
  explicit ToolError(const std::string& message) : Error("tool_error", message) {}
};

struct ToolSpec {
  std::string name;
  std::string description;
  std::function<std::string(std::string_view input)> handler;
};

class ToolRegistry {
 public:
  // Throws SchemaError on duplicate names.
  void add(ToolSpec tool);
  const ToolSpec* find(std::string_view name) const;
  std::vector<std::string> names() const;
  bool empty() const { return tools_.empty(); }

 private:
  std::vector<ToolSpec> tools_;
};

struct AgentOutcome {
  std::string final_answer;
  std::string final_thought;
  std::vector<ReActStep> transcript;
  int steps_used = 0;
};

// What the loop sends: an optional leading system message, then the prompt
// template with "{agent_scratchpad}" replaced by the scratchpad so far.
struct PromptFrame {
  std::string system_preamble;
  std::string prompt_template;
};

inline constexpr std::string_view kScratchpadPlaceholder = "{agent_scratchpad}";

std::vector<ChatMessage> build_messages(const PromptFrame& frame, std::string_view scratchpad);

struct LoopLimits {
  int max_steps = 15;
  // Corrective re-requests allowed per step after an unparseable reply.
  int max_format_retries = 2;
};

// Zero-shot ReAct loop. Throws StepBudgetExceeded when the budget (or the
// corrective re-requests) run out; backend errors propagate.
AgentOutcome run_loop(ChatSession& session, const CompletionParams& params,
                      const PromptFrame& frame, std::string scratchpad_seed,
                      const ToolRegistry& tools, LoopLimits limits = {});

}  // namespace hpoloop
