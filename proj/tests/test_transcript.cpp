#include <doctest.h>

#include "hpoloop/errors.hpp"
#include "hpoloop/harness.hpp"
#include "hpoloop/transcript.hpp"
#include "plan_util.hpp"
#include "support.hpp"

using namespace hpoloop;
using test_support::fixture;
using test_support::TempDir;

TEST_CASE("recorded transcripts replay through the parser") {
  TempDir dir;
  auto plan = test_support::convex_plan("agent", 10, 1, dir.path());
  test_support::use_scripted(plan, fixture("transcripts/convex_agent_10.json"));
  run_experiment(plan, RunPolicy::serial);
  const auto t3 = load_transcript(run_directory(plan, 0) / "transcripts" / "trial_003.json");
  REQUIRE(t3.size() == 1);
  CHECK(t3[0].agent == "creator");
  REQUIRE(t3[0].exchanges.size() == 2);
  const auto r = replay_transcript(t3);
  CHECK(r.format_failures == 0);
  REQUIRE(r.steps.size() == 1);
  CHECK(r.steps[0].step.action == "LoadHistoricalTrainingLogs");
  CHECK(r.steps[0].step.observation.find("Trial 2") != std::string::npos);
  REQUIRE(r.final_answers.size() == 1);
  CHECK(r.final_answers[0].first == "creator");
  CHECK(format_replay(r).find("LoadHistoricalTrainingLogs") != std::string::npos);
}

TEST_CASE("transcript files round-trip") {
  std::vector<TranscriptSection> sections{
      {"creator", {{{{Role::system, "sys"}, {Role::user, "Question: hi\nThought:"}}, "Final Answer: {}"}}},
      {"executor", {}}};
  const auto text = transcript_to_json(sections).dump();
  const auto back = parse_transcript(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].exchanges[0].reply == "Final Answer: {}");
  CHECK(back[0].exchanges[0].messages[1].content == "Question: hi\nThought:");
  CHECK(transcript_to_json(back) == transcript_to_json(sections));
  CHECK_THROWS_AS(parse_transcript("[{\"agent\": "), ParseError);
}

TEST_CASE("replay counts malformed replies") {
  std::vector<TranscriptSection> sections{
      {"creator", {{{{Role::user, "Question: q\nThought:"}}, "I am not following the format."}}}};
  CHECK(replay_transcript(sections).format_failures == 1);
}
