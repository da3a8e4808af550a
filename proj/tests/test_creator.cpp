#include <doctest.h>

#include "hpoloop/creator.hpp"
#include "hpoloop/errors.hpp"
#include "hpoloop/react.hpp"
#include "list_session.hpp"
#include "log_gen.hpp"
#include "support.hpp"

using namespace hpoloop;
using test_support::fixture;
using test_support::ListSession;
using test_support::make_log;
using test_support::space_from;

namespace {

const char* kLrOptSpace = R"({"hyperparameters": [
  {"name": "learning_rate", "kind": "float", "log_scale": true, "range": [1e-5, 1e-1]},
  {"name": "optimizer", "kind": "categorical", "choices": ["adam", "sgd"]}]})";

BackgroundInfo background_for(const SearchSpace& space) {
  return make_background("A small CNN.", "A toy image dataset.",
                         OptimizationGoal{"val_acc", Direction::maximize, "Maximize validation accuracy."},
                         space);
}

CreatorContext ctx_for(ChatSession& s, const SearchSpace& space, LogView view = LogView::full) {
  return CreatorContext{&s, {}, {}, background_for(space), view};
}

ExperimentLog empty_log() {
  RunMetadata meta;
  meta.goal_metric = "val_acc";
  meta.direction = Direction::maximize;
  return ExperimentLog(meta);
}

}  // namespace

TEST_CASE("create reads name: value lines from the final answer") {
  const auto space = space_from(kLrOptSpace);
  ListSession s({"Thought: start\nFinal Answer: learning_rate: 1e-3\noptimizer: adam"});
  Rng rng(1);
  const auto p = create(empty_log(), space, ctx_for(s, space), rng);
  CHECK(as_double(*p.config.get("learning_rate")) == doctest::Approx(1e-3));
  CHECK(std::get<std::string>(*p.config.get("optimizer")) == "adam");
  CHECK_FALSE(p.repaired);
  CHECK(p.attempts == 1);
}

TEST_CASE("create prefers a JSON object and keeps the prose as rationale") {
  const auto space = space_from(kLrOptSpace);
  ListSession s({"Final Answer: Lower the rate to stabilise training.\n"
                 "```json\n{\"learning_rate\": 0.0005, \"optimizer\": \"sgd\"}\n```"});
  Rng rng(1);
  const auto p = create(empty_log(), space, ctx_for(s, space), rng);
  CHECK(as_double(*p.config.get("learning_rate")) == doctest::Approx(5e-4));
  CHECK(std::get<std::string>(*p.config.get("optimizer")) == "sgd");
  CHECK(p.rationale.find("stabilise") != std::string::npos);
  CHECK(p.rationale.find("0.0005") == std::string::npos);
}

TEST_CASE("create reprompts once, then repairs an out-of-range value by clamping") {
  const auto space = space_from(kLrOptSpace);
  ListSession s({"Final Answer: learning_rate: 0.5\noptimizer: adam",
                 "Final Answer: learning_rate: 0.5\noptimizer: adam"});
  Rng rng(1);
  const auto p = create(empty_log(), space, ctx_for(s, space), rng);
  CHECK(as_double(*p.config.get("learning_rate")) == doctest::Approx(0.1));
  CHECK(p.repaired);
  CHECK(p.attempts == 2);
  REQUIRE(s.prompts.size() == 2);
  CHECK(s.prompts[1].find("learning_rate") != std::string::npos);
}

TEST_CASE("create never returns a logged configuration") {
  const auto space = space_from(kLrOptSpace);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto log = empty_log();
    log.append(test_support::make_entry(1, HyperparameterConfig{{{"learning_rate", 1e-3}, {"optimizer", std::string("adam")}}}, 0.8));
    log.append(test_support::make_entry(2, HyperparameterConfig{{{"learning_rate", 1e-2}, {"optimizer", std::string("adam")}}}, 0.7));
    const std::string dup = "Final Answer: {\"learning_rate\": 0.001, \"optimizer\": \"adam\"}";
    ListSession s({"Action: LoadHistoricalTrainingLogs\nAction Input: all", dup,
                   "Action: LoadHistoricalTrainingLogs\nAction Input: all", dup});
    Rng rng(seed);
    const auto p = create(log, space, ctx_for(s, space), rng);
    CHECK(is_valid(space, p.config));
    for (const auto& e : log.entries()) CHECK_FALSE(e.config == p.config);
    CHECK(p.repaired);
  }
}

TEST_CASE("repair_proposal fills, resamples and clamps") {
  const auto space = space_from(kLrOptSpace);
  Rng rng(3);
  const auto fixed = repair_proposal(HyperparameterConfig{{{"optimizer", std::string("rmsprop")}}}, space, empty_log(), rng);
  CHECK(is_valid(space, fixed));
  REQUIRE(fixed.get("learning_rate"));
  const auto clamped = repair_proposal(
      HyperparameterConfig{{{"learning_rate", 0.5}, {"optimizer", std::string("sgd")}}}, space, empty_log(), rng);
  CHECK(as_double(*clamped.get("learning_rate")) == doctest::Approx(0.1));
  CHECK(std::get<std::string>(*clamped.get("optimizer")) == "sgd");
}

TEST_CASE("create surfaces backend failures as ProposalError") {
  const auto space = space_from(kLrOptSpace);
  ListSession s({});
  Rng rng(1);
  CHECK_THROWS_AS(create(empty_log(), space, ctx_for(s, space), rng), ProposalError);
}

TEST_CASE("the creator tool returns the rendered log") {
  const auto space = space_from(kLrOptSpace);
  auto log = empty_log();
  log.append(test_support::make_entry(1, HyperparameterConfig{{{"learning_rate", 1e-3}, {"optimizer", std::string("adam")}}}, 0.8,
                                      "MARKER_RATIONALE"));
  ListSession s({"Action: LoadHistoricalTrainingLogs\nAction Input: all",
                 "Final Answer: {\"learning_rate\": 0.01, \"optimizer\": \"sgd\"}"});
  Rng rng(1);
  create(log, space, ctx_for(s, space), rng);
  REQUIRE(s.prompts.size() == 2);
  CHECK(s.prompts[0].find("MARKER_RATIONALE") == std::string::npos);
  CHECK(s.prompts[1].find("Observation: Optimization direction: maximize") != std::string::npos);
  CHECK(s.prompts[1].find("MARKER_RATIONALE") != std::string::npos);
  CHECK(s.prompts[0].find(std::string(kCreatorJsonInstruction)) != std::string::npos);
}

TEST_CASE("render_log_for_creator: empty log sentinel") {
  const auto text = render_log_for_creator(empty_log(), LogView::full);
  CHECK(text.find("No experiments recorded yet.\n") != std::string::npos);
}

TEST_CASE("render_log_for_creator: full view carries rationale, trajectory, analysis and score") {
  const auto log = make_log({0.7, std::nullopt});
  const auto text = render_log_for_creator(log, LogView::full);
  for (const char* s : {"Trial 1", "Rationale: rationale for trial 1", "Epoch: [0, 1, 2]", "Val Acc: [",
                        "Analysis: analysis of trial 1", "Final Score: 0.7", "Final Score: failed",
                        "divergence_detected"}) {
    CHECK(text.find(s) != std::string::npos);
  }
}

TEST_CASE("render_log_for_creator: opro view keeps only config and score") {
  const auto log = make_log({0.7});
  const auto text = render_log_for_creator(log, LogView::opro);
  CHECK(text.find("{\"x\":1") != std::string::npos);
  CHECK(text.find("0.7") != std::string::npos);
  CHECK(text.find("rationale") == std::string::npos);
  CHECK(text.find("Epoch") == std::string::npos);
  CHECK(text.find("analysis") == std::string::npos);
}

TEST_CASE("render_log_for_creator: opro view puts the best pair last") {
  const auto text = render_log_for_creator(make_log({0.7, 0.9, 0.8}), LogView::opro);
  const auto a = text.find("Score: 0.7"), b = text.find("Score: 0.8"), c = text.find("Score: 0.9");
  REQUIRE(a != std::string::npos);
  REQUIRE(b != std::string::npos);
  REQUIRE(c != std::string::npos);
  CHECK(a < b);
  CHECK(b < c);

  const auto minimize = render_log_for_creator(make_log({0.7, 0.9, 0.8}, Direction::minimize), LogView::opro);
  CHECK(minimize.find("Score: 0.9") < minimize.find("Score: 0.8"));
  CHECK(minimize.find("Score: 0.8") < minimize.find("Score: 0.7"));
}

TEST_CASE("extract_config parses the experimental-log proposal excerpts") {
  const auto space = load_search_space(fixture("spaces/image_logs.json").string());
  const auto cases = json::parse(read_file(fixture("react_excerpts.json")));
  int checked = 0;
  for (const auto& c : cases) {
    if (!c.contains("config")) continue;
    CAPTURE(c["id"].get<std::string>());
    const auto got = extract_config(c["final"].get<std::string>(), space);
    REQUIRE(got);
    const auto want = config_from_json(c["config"]);
    for (const auto& [name, value] : want.assignments) {
      const HpValue* v = got->get(name);
      REQUIRE(v);
      CHECK(value_equal(*v, value));
    }
    CHECK(is_valid(space, validate_config(space, *got, ValidationMode::clamp)));
    ++checked;
  }
  CHECK(checked == 3);
}

TEST_CASE("extract_config returns nothing for prose without assignments") {
  const auto space = space_from(kLrOptSpace);
  CHECK_FALSE(extract_config("I would lower the learning rate a bit.", space));
}

TEST_CASE("analyze picks the best trial from the log") {
  const auto space = space_from(R"({"hyperparameters": [{"name": "x", "kind": "float", "range": [0, 100]}]})");
  const std::string reply =
      "1. Best Hyper-Parameter Found in Experiment: trial 2 reached 82.45.\n"
      "2. Influence of Each Hyper-Parameter: x matters.\n"
      "3. Potential Future Exploration Direction: try larger x.";
  {
    ListSession s({reply});
    const auto a = analyze(make_log({80.41, 82.45}), space, ctx_for(s, space));
    CHECK(a.best_trial == 2);
    CHECK(as_double(*a.best_config.get("x")) == 2.0);
    CHECK(a.best_score == doctest::Approx(82.45));
    CHECK(a.best_reasoning.find("trial 2 reached") != std::string::npos);
    CHECK(a.influence_notes == "x matters.");
    CHECK(a.future_directions == "try larger x.");
    REQUIRE(s.prompts.size() == 1);
    CHECK(s.prompts[0].rfind(std::string(kAnalysisRequestMarker), 0) == 0);
  }
  {
    ListSession s({reply});
    CHECK(analyze(make_log({0.4}), space, ctx_for(s, space)).best_trial == 1);
  }
  {
    ListSession s({reply});
    CHECK(analyze(make_log({0.5, 0.5}), space, ctx_for(s, space)).best_trial == 1);
  }
}

TEST_CASE("analyze keeps the log's best when the reply disagrees") {
  const auto space = space_from(R"({"hyperparameters": [{"name": "x", "kind": "float", "range": [0, 100]}]})");
  ListSession s({"1. Best Hyper-Parameter Found in Experiment: {\"x\": 1}\n2. Influence of Each Hyper-Parameter: -\n"
                 "3. Potential Future Exploration Direction: -"});
  const auto a = analyze(make_log({0.1, 0.9}), space, ctx_for(s, space));
  CHECK(a.best_trial == 2);
  CHECK(a.best_reasoning.find("the log value is kept") != std::string::npos);
}

TEST_CASE("local_final_analysis needs a succeeded trial") {
  CHECK_THROWS_AS(local_final_analysis(empty_log()), EmptyLog);
  CHECK_THROWS_AS(local_final_analysis(make_log({std::nullopt})), EmptyLog);
  const auto a = local_final_analysis(make_log({std::nullopt, 3.0, 2.0}, Direction::minimize));
  CHECK(a.best_trial == 3);
  CHECK(a.best_reasoning.find("n/a (non-agent strategy)") != std::string::npos);
}
