#include "hpoloop/react.hpp"

#include <optional>

#include "hpoloop/text_util.hpp"

namespace hpoloop {

namespace {

enum class Marker { none, thought, action, action_input, final_answer, observation };

struct MarkedLine {
  Marker marker = Marker::none;
  std::string rest;  // text after the marker
};

MarkedLine classify(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  std::string_view s = line.substr(i);
  auto take = [&](std::string_view m, Marker k) -> std::optional<MarkedLine> {
    if (s.starts_with(m)) return MarkedLine{k, std::string(s.substr(m.size()))};
    return std::nullopt;
  };
  if (auto r = take("Thought:", Marker::thought)) return *r;
  if (auto r = take("Action Input:", Marker::action_input)) return *r;
  if (auto r = take("Action:", Marker::action)) return *r;
  if (auto r = take("Final Answer:", Marker::final_answer)) return *r;
  if (auto r = take("Observation:", Marker::observation)) return *r;
  return {};
}

// Joins rest-of-marker-line with following lines in [from, to).
std::string collect(const std::vector<std::string>& lines, std::size_t marker_line,
                    const std::string& first, std::size_t to) {
  std::string out = first;
  for (std::size_t i = marker_line + 1; i < to; ++i) out += "\n" + lines[i];
  return trim(out);
}

std::string thought_before(const std::vector<std::string>& lines,
                           const std::vector<MarkedLine>& marks, std::size_t end) {
  for (std::size_t i = 0; i < end; ++i) {
    if (marks[i].marker == Marker::thought) return collect(lines, i, marks[i].rest, end);
  }
  // The prompt ends with a "Thought:" cue, so an unmarked lead-in is the thought.
  std::vector<std::string> lead;
  for (std::size_t i = 0; i < end; ++i) {
    if (marks[i].marker != Marker::none) break;
    lead.push_back(lines[i]);
  }
  return trim(join(lead, "\n"));
}

}  // namespace

ParsedBlock parse_block(std::string_view text) {
  const auto lines = split_lines(text);
  std::vector<MarkedLine> marks;
  marks.reserve(lines.size());
  for (const auto& l : lines) marks.push_back(classify(l));

  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (marks[i].marker == Marker::final_answer) {
      return FinalAnswer{collect(lines, i, marks[i].rest, lines.size()),
                         thought_before(lines, marks, i)};
    }
  }

  std::optional<std::size_t> action_at;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (marks[i].marker == Marker::action) {
      action_at = i;
      break;
    }
  }
  if (!action_at) return ParseFailure{"no 'Action:' or 'Final Answer:' marker found"};

  std::optional<std::size_t> input_at;
  for (std::size_t i = *action_at + 1; i < lines.size(); ++i) {
    if (marks[i].marker == Marker::action_input) {
      input_at = i;
      break;
    }
    if (marks[i].marker == Marker::action) break;
  }
  if (!input_at) return ParseFailure{"'Action:' without a following 'Action Input:'"};

  std::size_t input_end = lines.size();
  for (std::size_t i = *input_at + 1; i < lines.size(); ++i) {
    if (marks[i].marker == Marker::observation) {
      input_end = i;
      break;
    }
  }

  ReActStep step;
  step.thought = thought_before(lines, marks, *action_at);
  step.action = collect(lines, *action_at, marks[*action_at].rest, *input_at);
  step.action_input = collect(lines, *input_at, marks[*input_at].rest, input_end);
  if (step.action.empty()) return ParseFailure{"empty action name"};
  // The Creator template lists 'Final Answer' as a valid action.
  if (step.action == "Final Answer") return FinalAnswer{step.action_input, step.thought};
  return step;
}

std::string format_step(const ReActStep& step) {
  return "Thought: " + step.thought + "\nAction: " + step.action +
         "\nAction Input: " + step.action_input;
}

void ToolRegistry::add(ToolSpec tool) {
  if (find(tool.name)) throw SchemaError("duplicate tool name " + tool.name);
  tools_.push_back(std::move(tool));
}

const ToolSpec* ToolRegistry::find(std::string_view name) const {
  for (const auto& t : tools_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::vector<std::string> ToolRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& t : tools_) out.push_back(t.name);
  return out;
}

std::vector<ChatMessage> build_messages(const PromptFrame& frame, std::string_view scratchpad) {
  std::vector<ChatMessage> messages;
  if (!frame.system_preamble.empty()) messages.push_back({Role::system, frame.system_preamble});
  std::string prompt = frame.prompt_template;
  const auto pos = prompt.find(kScratchpadPlaceholder);
  std::string pad(scratchpad);
  if (pos == std::string::npos) {
    prompt += pad;
  } else {
    if (pos > 0 && prompt[pos - 1] == ':' && !pad.empty() && pad.front() != ' ' &&
        pad.front() != '\n') {
      pad.insert(pad.begin(), ' ');
    }
    prompt.replace(pos, kScratchpadPlaceholder.size(), pad);
  }
  messages.push_back({Role::user, std::move(prompt)});
  return messages;
}

AgentOutcome run_loop(ChatSession& session, const CompletionParams& params,
                      const PromptFrame& frame, std::string scratchpad_seed,
                      const ToolRegistry& tools, LoopLimits limits) {
  AgentOutcome outcome;
  std::string scratchpad = std::move(scratchpad_seed);
  int format_failures = 0;
  for (;;) {
    const auto messages = build_messages(frame, scratchpad);
    const std::string reply = session.complete(messages, params);
    ParsedBlock parsed = parse_block(reply);

    if (auto* fin = std::get_if<FinalAnswer>(&parsed)) {
      outcome.final_answer = fin->text;
      outcome.final_thought = fin->thought;
      outcome.steps_used = static_cast<int>(outcome.transcript.size());
      return outcome;
    }
    if (auto* failure = std::get_if<ParseFailure>(&parsed)) {
      if (++format_failures > limits.max_format_retries) {
        throw StepBudgetExceeded("reply did not follow the required format after " +
                                 std::to_string(limits.max_format_retries) +
                                 " corrective re-requests: " + failure->reason);
      }
      scratchpad += trim(reply) +
                    "\nObservation: Your reply did not follow the required format (" +
                    failure->reason +
                    "). Reply with 'Action:' and 'Action Input:' lines, or with a "
                    "'Final Answer:' line.\nThought: ";
      continue;
    }

    format_failures = 0;
    auto step = std::get<ReActStep>(std::move(parsed));
    if (static_cast<int>(outcome.transcript.size()) >= limits.max_steps) {
      throw StepBudgetExceeded("no Final Answer within " + std::to_string(limits.max_steps) +
                               " steps");
    }
    if (const ToolSpec* tool = tools.find(step.action)) {
      try {
        step.observation = tool->handler(step.action_input);
      } catch (const ToolError& e) {
        step.observation = std::string("Error: ") + e.what();
      }
    } else {
      step.observation = "Unknown tool '" + step.action + "'. Valid tools are: " +
                         join(tools.names(), ", ") + ".";
    }
    scratchpad += step.thought + "\nAction: " + step.action + "\nAction Input: " +
                  step.action_input + "\nObservation: " + step.observation + "\nThought: ";
    outcome.transcript.push_back(std::move(step));
  }
}

}  // namespace hpoloop
