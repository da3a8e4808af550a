#include <doctest.h>

#include "hpoloop/errors.hpp"
#include "hpoloop/llm_client.hpp"
#include "hpoloop/react.hpp"
#include "support.hpp"

using namespace hpoloop;
using test_support::fixture;

namespace {

// Random well-formed step: marker-free lines, no surrounding whitespace.
ReActStep random_step(Rng& rng) {
  static const std::vector<std::string> words{
      "check", "the", "logs", "lr", "0.001", "{\"lr\":", "0.01}", "val_acc", "is", "rising",
      "Action", "Thought", "Observation", "maybe:", "[1,", "2]", "ok.", "Final", "Answer", "-", "#"};
  auto line = [&](int min_words) {
    const int n = static_cast<int>(uniform_int(rng, min_words, 7));
    std::string s;
    for (int i = 0; i < n; ++i) {
      // never start a line with a marker word followed by a colon
      std::string w = words[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(words.size()) - 1))];
      if (i == 0 && (w == "Action" || w == "Thought" || w == "Observation" || w == "Final")) w = "so";
      s += (i ? " " : "") + w;
    }
    return s;
  };
  auto block = [&](int max_lines, int min_words) {
    const int n = static_cast<int>(uniform_int(rng, 1, max_lines));
    std::string s;
    for (int i = 0; i < n; ++i) s += (i ? "\n" : "") + line(i == 0 ? min_words : 1);
    return s;
  };
  static const std::vector<std::string> tools{"LoadConfigs", "WriteConfigs", "ExecutePythonFile",
                                              "LoadTrainingLogs", "LoadHistoricalTrainingLogs", "Echo"};
  ReActStep s;
  s.thought = uniform01(rng) < 0.1 ? "" : block(3, 1);
  s.action = tools[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(tools.size()) - 1))];
  s.action_input = uniform01(rng) < 0.1 ? "" : block(3, 1);
  return s;
}

std::vector<std::string> script(std::initializer_list<const char*> replies) {
  return {replies.begin(), replies.end()};
}

ToolRegistry echo_tools() {
  ToolRegistry tools;
  tools.add({"Echo", "returns its input", [](std::string_view in) { return std::string(in); }});
  return tools;
}

const PromptFrame kFrame{"", "Question: say hi\nThought:{agent_scratchpad}"};

}  // namespace

TEST_CASE("parse_block recognises a tool step") {
  const auto r = parse_block("Thought: check logs\nAction: LoadHistoricalTrainingLogs\nAction Input: none");
  const auto* step = std::get_if<ReActStep>(&r);
  REQUIRE(step);
  CHECK(step->thought == "check logs");
  CHECK(step->action == "LoadHistoricalTrainingLogs");
  CHECK(step->action_input == "none");
}

TEST_CASE("parse_block recognises a final answer") {
  const auto r = parse_block("Thought: done\nFinal Answer: global_pool: avg");
  const auto* fa = std::get_if<FinalAnswer>(&r);
  REQUIRE(fa);
  CHECK(fa->text == "global_pool: avg");
  CHECK(fa->thought == "done");
}

TEST_CASE("parse_block reports a missing marker") {
  CHECK(std::holds_alternative<ParseFailure>(parse_block("I think we should try adam")));
  CHECK(std::holds_alternative<ParseFailure>(parse_block("Action: Echo")));
  CHECK(std::holds_alternative<ParseFailure>(parse_block("action: Echo\naction input: x")));
}

TEST_CASE("parse_block cuts a hallucinated observation") {
  const auto r = parse_block("Action: Echo\nAction Input: {\"a\": 1}\nObservation: made up\nThought: more");
  const auto* step = std::get_if<ReActStep>(&r);
  REQUIRE(step);
  CHECK(step->action_input == "{\"a\": 1}");
}

TEST_CASE("parse_block treats a 'Final Answer' action as the answer") {
  const auto r = parse_block("Thought: ready\nAction: Final Answer\nAction Input: lr: 0.01");
  const auto* fa = std::get_if<FinalAnswer>(&r);
  REQUIRE(fa);
  CHECK(fa->text == "lr: 0.01");
}

TEST_CASE("parse_block accepts indented markers and multi-line inputs") {
  const auto r = parse_block("  Thought: a\n  Action: WriteConfigs\n  Action Input: {\n  \"lr\": 0.1\n}");
  const auto* step = std::get_if<ReActStep>(&r);
  REQUIRE(step);
  CHECK(step->action == "WriteConfigs");
  CHECK(step->action_input == "{\n  \"lr\": 0.1\n}");
}

TEST_CASE("every excerpt in the marker corpus parses as expected") {
  const auto cases = json::parse(read_file(fixture("react_excerpts.json")));
  REQUIRE(cases.size() >= 8);
  for (const auto& c : cases) {
    CAPTURE(c["id"].get<std::string>());
    const auto r = parse_block(c["text"].get<std::string>());
    REQUIRE_FALSE(std::holds_alternative<ParseFailure>(r));
    if (c["expect"] == "final") {
      const auto* fa = std::get_if<FinalAnswer>(&r);
      REQUIRE(fa);
      CHECK(fa->text == c["final"].get<std::string>());
      if (c.contains("thought")) CHECK(fa->thought == c["thought"].get<std::string>());
    } else {
      const auto* step = std::get_if<ReActStep>(&r);
      REQUIRE(step);
      CHECK(step->thought == c["thought"].get<std::string>());
      CHECK(step->action == c["action"].get<std::string>());
      CHECK(step->action_input == c["input"].get<std::string>());
    }
  }
}

TEST_CASE("format and parse are inverse on 500 generated steps") {
  Rng rng(2024);
  for (int i = 0; i < 500; ++i) {
    const auto step = random_step(rng);
    const auto text = format_step(step);
    CAPTURE(text);
    const auto r = parse_block(text);
    const auto* back = std::get_if<ReActStep>(&r);
    REQUIRE(back);
    CHECK(*back == step);
    CHECK(format_step(*back) == text);
  }
}

TEST_CASE("run_loop dispatches one tool and returns the final answer") {
  ScriptedBackend backend(script({"Action: Echo\nAction Input: hi", "Final Answer: done"}));
  auto session = backend.open_session();
  const auto out = run_loop(*session, {}, kFrame, "", echo_tools());
  CHECK(out.final_answer == "done");
  CHECK(out.steps_used == 1);
  REQUIRE(out.transcript.size() == 1);
  CHECK(out.transcript[0].observation == "hi");
}

TEST_CASE("run_loop with an immediate answer uses no steps") {
  ScriptedBackend backend(script({"Final Answer: immediate"}));
  auto session = backend.open_session();
  const auto out = run_loop(*session, {}, kFrame, "", echo_tools());
  CHECK(out.final_answer == "immediate");
  CHECK(out.steps_used == 0);
}

TEST_CASE("run_loop enforces the step budget") {
  ScriptedBackend backend(script({"Action: Echo\nAction Input: 1", "Action: Echo\nAction Input: 2",
                                  "Action: Echo\nAction Input: 3", "Final Answer: late"}));
  auto session = backend.open_session();
  CHECK_THROWS_AS(run_loop(*session, {}, kFrame, "", echo_tools(), LoopLimits{2, 2}), StepBudgetExceeded);
}

TEST_CASE("run_loop re-requests after an unparseable reply") {
  ScriptedBackend backend(script({"just chatting", "Final Answer: fixed"}));
  auto session = backend.open_session();
  CHECK(run_loop(*session, {}, kFrame, "", echo_tools()).final_answer == "fixed");

  ScriptedBackend stubborn(script({"a", "b", "c", "Final Answer: too late"}));
  auto s2 = stubborn.open_session();
  CHECK_THROWS_AS(run_loop(*s2, {}, kFrame, "", echo_tools(), LoopLimits{15, 2}), StepBudgetExceeded);
}

TEST_CASE("run_loop reports unknown tools and tool errors as observations") {
  ToolRegistry tools = echo_tools();
  tools.add({"Fail", "always fails", [](std::string_view) -> std::string { throw ToolError("boom"); }});
  ScriptedBackend backend(script({"Action: Nope\nAction Input: x", "Action: Fail\nAction Input: x",
                                  "Final Answer: ok"}));
  auto session = backend.open_session();
  const auto out = run_loop(*session, {}, kFrame, "", tools);
  REQUIRE(out.transcript.size() == 2);
  CHECK(out.transcript[0].observation.find("Nope") != std::string::npos);
  CHECK(out.transcript[1].observation.find("boom") != std::string::npos);
}

TEST_CASE("the scratchpad grows with every step") {
  struct Capture final : ChatSession {
    std::vector<std::string> prompts;
    std::vector<std::string> replies{"Action: Echo\nAction Input: one", "Final Answer: end"};
    std::string complete(std::span<const ChatMessage> m, const CompletionParams&) override {
      prompts.push_back(m.back().content);
      auto r = replies.front();
      replies.erase(replies.begin());
      return r;
    }
  } cap;
  run_loop(cap, {}, kFrame, "", echo_tools());
  REQUIRE(cap.prompts.size() == 2);
  CHECK(cap.prompts[0] == "Question: say hi\nThought:");
  CHECK(cap.prompts[1].find("Action: Echo\nAction Input: one\nObservation: one\nThought:") != std::string::npos);
}
