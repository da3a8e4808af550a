// Prints one PASS/FAIL line per acceptance criterion; exits 1 on any FAIL.
#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <sys/wait.h>

#include "hpoloop/baselines.hpp"
#include "hpoloop/coverage.hpp"
#include "hpoloop/errors.hpp"
#include "hpoloop/harness.hpp"
#include "hpoloop/react.hpp"
#include "hpoloop/transcript.hpp"
#include "log_gen.hpp"
#include "plan_util.hpp"
#include "stub_server.hpp"
#include "support.hpp"

using namespace hpoloop;
using test_support::convex_plan;
using test_support::fixture;
using test_support::TempDir;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

std::pair<int, std::string> run_command(const std::string& command) {
  FILE* pipe = ::popen((command + " 2>&1").c_str(), "r");
  if (!pipe) return {-1, "popen failed"};
  std::string out;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string source_path(const std::string& rel) {
  return (std::filesystem::path(HPOLOOP_SOURCE_DIR) / rel).string();
}

// Brute-force argbest over succeeded entries, earliest wins ties.
const LogEntry* argbest(const ExperimentLog& log) {
  const LogEntry* best = nullptr;
  for (const auto& e : log.entries()) {
    if (!e.result.final_score) continue;
    const double s = *e.result.final_score;
    if (!best || (log.metadata.direction == Direction::maximize ? s > *best->result.final_score
                                                                : s < *best->result.final_score))
      best = &e;
  }
  return best;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Every user/system message persisted under runs/*/transcripts.
std::vector<std::pair<std::string, std::string>> persisted_prompts(const std::filesystem::path& out) {
  std::vector<std::pair<std::string, std::string>> prompts;
  std::vector<std::filesystem::path> files;
  for (const auto& f : std::filesystem::recursive_directory_iterator(out / "runs")) {
    if (f.path().parent_path().filename() == "transcripts") files.push_back(f.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    for (const auto& section : load_transcript(f)) {
      for (const auto& ex : section.exchanges) {
        std::string text;
        for (const auto& m : ex.messages) text += m.content + "\n";
        prompts.emplace_back(f.filename().string(), text);
      }
    }
  }
  return prompts;
}

Outcome coverage_claim() {
  const auto start = Clock::now();
  CoverageParams p;
  const auto parallel = coverage_parallel(p);
  const double secs = seconds_since(start);
  const double f = parallel.fraction();
  const bool ok = f >= 0.985 && f <= 1.0 && secs < 5.0;
  return {ok, "fraction " + fmt(f) + " over " + std::to_string(parallel.repetitions) + " repetitions (analytic " +
                  fmt(coverage_analytic(p.draws, p.region_measure)) + "), " + fmt(secs, 3) + " s"};
}

Outcome convex_agent() {
  TempDir dir("acc2");
  const auto start = Clock::now();
  auto plan = convex_plan("agent", 10, 1, dir.path());
  test_support::use_bisect_refine(plan);
  const auto result = run_experiment(plan, RunPolicy::serial);
  const double secs = seconds_since(start);
  const auto& log = result.logs.at(0);
  const auto best = best_so_far(log, 10, Direction::minimize);
  const auto& first = log.entries().at(0).config.assignments;
  const bool midpoint = as_double(first.at("x")) == 0.0 && as_double(first.at("y")) == 0.0;
  const bool ok = log.size() == 10 && best && best->score < 0.5 && midpoint && secs < 2.0;
  return {ok, "best f " + (best ? fmt(best->score) : std::string("none")) + " at trial " +
                  (best ? std::to_string(best->trial_index) : "-") + ", trial 1 " +
                  (midpoint ? "at" : "not at") + " the midpoint, " + fmt(secs, 3) + " s"};
}

Outcome tpe_vs_random() {
  // threshold from a random-vs-random null simulation: the 95th percentile of
  // |median difference| over 200 seed pairs was 0.557
  constexpr double kMargin = 0.56;
  TempDir dir("acc3");
  const auto start = Clock::now();
  std::map<std::string, double> medians;
  for (const std::string s : {"random", "tpe"}) {
    auto plan = convex_plan(s, 20, 50, dir / s, 7);
    plan.workers = 8;
    const auto result = run_experiment(plan, RunPolicy::parallel);
    std::vector<double> best;
    for (const auto& log : result.logs) best.push_back(best_so_far(log, 20, Direction::minimize)->score);
    medians[s] = median(best);
  }
  const double secs = seconds_since(start);
  const double diff = medians["random"] - medians["tpe"];
  const bool ok = diff > kMargin && secs < 30.0;
  return {ok, "median best at T=20: random " + fmt(medians["random"]) + ", tpe " + fmt(medians["tpe"]) +
                  " (difference " + fmt(diff) + ", required > " + fmt(kMargin) + "), " + fmt(secs, 3) + " s"};
}

Outcome loop_fidelity() {
  TempDir dir("acc4");
  auto plan = convex_plan("agent", 10, 1, dir.path());
  test_support::use_scripted(plan, fixture("transcripts/convex_agent_10.json"));
  run_experiment(plan, RunPolicy::serial);
  const auto log = load_log(run_directory(plan, 0) / "run_log.json");
  std::vector<std::string> problems;
  if (log.size() != 10) problems.push_back(std::to_string(log.size()) + " entries");
  for (const auto& e : log.entries()) {
    if (e.config.assignments.empty()) problems.push_back("empty config at " + std::to_string(e.trial_index));
    if (trim(e.rationale).empty()) problems.push_back("empty rationale at " + std::to_string(e.trial_index));
    if (!e.result.trajectory || e.result.trajectory->epochs.empty())
      problems.push_back("no trajectory at " + std::to_string(e.trial_index));
  }
  const auto* best = argbest(log);
  if (!log.final_analysis) {
    problems.push_back("no final analysis");
  } else if (!best || log.final_analysis->best_config != best->config ||
             log.final_analysis->best_trial != best->trial_index) {
    problems.push_back("final analysis disagrees with argbest");
  }
  if (!problems.empty()) return {false, join(problems, "; ")};
  return {true, "10 entries with config, rationale and trajectory; best trial " +
                    std::to_string(best->trial_index) + " matches the brute-force argbest"};
}

Outcome opro_contract() {
  TempDir dir("acc5");
  const auto transcript = fixture("transcripts/convex_agent_10.json");
  auto opro = convex_plan("opro", 10, 1, dir / "opro");
  test_support::use_scripted(opro, transcript);
  run_experiment(opro, RunPolicy::serial);
  auto agent = convex_plan("agent", 10, 1, dir / "agent");
  test_support::use_scripted(agent, transcript);
  run_experiment(agent, RunPolicy::serial);

  std::vector<std::string> problems;
  const std::vector<std::string> markers{"Rationale:", "Training Trajectory", "Epoch:", "Analysis:",
                                         "coarse sweep", "Final Score:"};
  int with_pairs = 0;
  const auto opro_prompts = persisted_prompts(dir / "opro");
  for (const auto& [file, text] : opro_prompts) {
    for (const auto& m : markers) {
      if (text.find(m) != std::string::npos) problems.push_back("opro " + file + " contains '" + m + "'");
    }
    if (text.find("[LoadHistoricalTrainingLogs observation]") != std::string::npos ||
        text.find("Observation:") != std::string::npos) {
      if (text.find("Hyper-parameters: ") != std::string::npos && text.find("Score: ") != std::string::npos)
        ++with_pairs;
    }
  }
  if (with_pairs == 0) problems.push_back("no opro prompt shows config/score pairs");

  int agent_later = 0, agent_with_trajectory = 0;
  for (const auto& [file, text] : persisted_prompts(dir / "agent")) {
    if (file == "trial_001.json") continue;
    ++agent_later;
    if (text.find("Training Trajectory:") != std::string::npos && text.find("Epoch: [") != std::string::npos)
      ++agent_with_trajectory;
  }
  // the first request of each trial comes before the log is loaded, so only
  // prompts that carry the tool observation have to show trajectories
  if (agent_with_trajectory == 0) problems.push_back("no agent prompt after trial 1 shows a trajectory");
  if (!problems.empty()) return {false, join(problems, "; ")};
  return {true, std::to_string(opro_prompts.size()) + " opro prompts free of rationale/trajectory markers, " +
                    std::to_string(with_pairs) + " with config/score pairs; " +
                    std::to_string(agent_with_trajectory) + " of " + std::to_string(agent_later) +
                    " later agent prompts carry trajectory text"};
}

Outcome milestone_protocol() {
  Rng rng(1000);
  const std::vector<int> milestones{1, 3, 5, 10};
  int checked = 0;
  std::vector<std::string> problems;
  while (checked < 1000 && problems.size() < 5) {
    const Direction dir = uniform01(rng) < 0.5 ? Direction::maximize : Direction::minimize;
    std::vector<ExperimentLog> runs;
    const int n_runs = static_cast<int>(uniform_int(rng, 1, 5));
    for (int i = 0; i < n_runs && checked < 1000; ++i, ++checked) runs.push_back(test_support::random_log(rng, 12));
    const auto report = milestone_report(runs, milestones, dir);
    for (std::size_t m = 0; m < milestones.size(); ++m) {
      std::vector<double> values;
      for (const auto& log : runs) {
        if (log.metadata.aborted) continue;
        std::optional<double> best;
        for (const auto& e : log.entries()) {
          if (e.trial_index > milestones[m] || !e.result.final_score) continue;
          const double s = *e.result.final_score;
          if (!best || (dir == Direction::maximize ? s > *best : s < *best)) best = s;
        }
        if (best) values.push_back(*best);
      }
      const auto& row = report.rows[m];
      if (row.n != static_cast<int>(values.size())) {
        problems.push_back("count mismatch at t=" + std::to_string(milestones[m]));
        continue;
      }
      if (values.empty()) {
        if (row.mean) problems.push_back("mean without values at t=" + std::to_string(milestones[m]));
        continue;
      }
      long double sum = 0;
      for (double v : values) sum += v;
      const double mean = static_cast<double>(sum / values.size());
      if (!row.mean || std::abs(*row.mean - mean) > 1e-9 * std::max(1.0, std::abs(mean)))
        problems.push_back("mean mismatch at t=" + std::to_string(milestones[m]));
    }
    for (const auto& log : runs) {
      std::optional<double> prev;
      for (int t = 1; t <= static_cast<int>(log.size()); ++t) {
        const auto b = best_so_far(log, t, dir);
        if (prev && (!b || (dir == Direction::maximize ? b->score < *prev : b->score > *prev)))
          problems.push_back("best-so-far not monotone");
        if (b) prev = b->score;
      }
    }
  }
  if (!problems.empty()) return {false, join(problems, "; ")};
  return {true, "1000 generated logs: milestone rows at {1,3,5,10} equal the brute-force values; "
                "best-so-far is monotone"};
}

Outcome prompt_fidelity() {
  const std::string cli = HPOLOOP_CLI;
  const std::string plan = source_path("plans/convex.plan.json");
  const auto creator = run_command("'" + cli + "' render-prompt '" + plan + "' --which creator");
  const auto executor =
      run_command("'" + cli + "' render-prompt '" + plan + "' --which executor --config '{\"x\": 1, \"y\": 2}'");
  std::vector<std::string> problems;
  if (creator.first != 0) problems.push_back("creator render exited " + std::to_string(creator.first));
  if (executor.first != 0) problems.push_back("executor render exited " + std::to_string(executor.first));
  auto require_lines = [&](const std::string& golden, const std::string& output, const std::string& which) {
    int n = 0;
    for (const auto& line : split_lines(read_file(fixture("golden/" + golden)))) {
      if (line.find('{') != std::string::npos || trim(line).empty()) continue;
      ++n;
      if (output.find(line) == std::string::npos) problems.push_back(which + " lacks: " + line);
    }
    return n;
  };
  const int creator_lines = require_lines("creator_template.txt", creator.second, "creator");
  const int executor_lines = require_lines("executor_template.txt", executor.second, "executor");
  for (const char* needle : {"You are a task creation AI expert", "Thought: Describe your reasoning process",
                             "Action Input: Input for the action", "Observation: Outcome of the action"}) {
    if (creator.second.find(needle) == std::string::npos) problems.push_back(std::string("creator lacks ") + needle);
  }
  for (const char* tool : {"LoadConfigs", "WriteConfigs", "ExecutePythonFile", "LoadTrainingLogs"}) {
    if (executor.second.find(tool) == std::string::npos) problems.push_back(std::string("executor lacks ") + tool);
  }
  for (const char* needle : {"Thought:", "Action:", "Action Input:", "Observation:"}) {
    if (executor.second.find(needle) == std::string::npos) problems.push_back(std::string("executor lacks ") + needle);
  }
  if (!problems.empty()) return {false, join(problems, "; ")};
  return {true, "creator output holds " + std::to_string(creator_lines) + " golden lines, executor output " +
                    std::to_string(executor_lines) + " golden lines and all four tool names"};
}

// Same generator as the unit test: marker-free lines, no surrounding whitespace.
ReActStep random_step(Rng& rng) {
  static const std::vector<std::string> words{
      "check", "the", "logs", "lr", "0.001", "{\"lr\":", "0.01}", "val_acc", "is", "rising",
      "Action", "Thought", "Observation", "maybe:", "[1,", "2]", "ok.", "Final", "Answer", "-", "#"};
  auto pick = [&](const std::vector<std::string>& v) {
    return v[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(v.size()) - 1))];
  };
  auto block = [&]() {
    const int lines = static_cast<int>(uniform_int(rng, 1, 3));
    std::string s;
    for (int l = 0; l < lines; ++l) {
      const int n = static_cast<int>(uniform_int(rng, 1, 7));
      std::string line;
      for (int i = 0; i < n; ++i) {
        std::string w = pick(words);
        if (i == 0 && (w == "Action" || w == "Thought" || w == "Observation" || w == "Final")) w = "so";
        line += (i ? " " : "") + w;
      }
      s += (l ? "\n" : "") + line;
    }
    return s;
  };
  static const std::vector<std::string> tools{"LoadConfigs", "WriteConfigs", "ExecutePythonFile",
                                              "LoadTrainingLogs", "LoadHistoricalTrainingLogs"};
  ReActStep s;
  s.thought = uniform01(rng) < 0.1 ? "" : block();
  s.action = pick(tools);
  s.action_input = uniform01(rng) < 0.1 ? "" : block();
  return s;
}

Outcome react_round_trip() {
  std::vector<std::string> problems;
  const auto cases = json::parse(read_file(fixture("react_excerpts.json")));
  for (const auto& c : cases) {
    const auto id = c["id"].get<std::string>();
    const auto r = parse_block(c["text"].get<std::string>());
    if (c["expect"] == "final") {
      const auto* fa = std::get_if<FinalAnswer>(&r);
      if (!fa || fa->text != c["final"].get<std::string>()) problems.push_back("excerpt " + id);
    } else {
      const auto* step = std::get_if<ReActStep>(&r);
      if (!step || step->thought != c["thought"].get<std::string>() || step->action != c["action"].get<std::string>() ||
          step->action_input != c["input"].get<std::string>())
        problems.push_back("excerpt " + id);
    }
  }
  Rng rng(500);
  int round_trips = 0;
  for (int i = 0; i < 500; ++i) {
    const auto step = random_step(rng);
    const auto text = format_step(step);
    const auto r = parse_block(text);
    const auto* back = std::get_if<ReActStep>(&r);
    if (back && *back == step && format_step(*back) == text) {
      ++round_trips;
    } else if (problems.size() < 5) {
      problems.push_back("round trip failed for: " + text);
    }
  }
  if (!problems.empty()) return {false, join(problems, "; ")};
  return {true, std::to_string(cases.size()) + " corpus excerpts parse as expected; " +
                    std::to_string(round_trips) + "/500 generated steps round-trip"};
}

Outcome wire_format() {
  std::vector<std::string> problems;
  {
    test_support::StubServer stub("plain");
    HttpBackendSpec spec;
    spec.base_url = stub.base_url();
    HttpBackend backend(spec, [](std::chrono::milliseconds) {});
    const std::vector<ChatMessage> msgs{{Role::user, "hello"}};
    CompletionParams plain;
    CompletionParams capped;
    capped.max_tokens = 64;
    backend.open_session()->complete(msgs, plain);
    backend.open_session()->complete(msgs, capped);
    const auto reqs = stub.requests();
    if (reqs.size() != 2) {
      problems.push_back(std::to_string(reqs.size()) + " requests captured");
    } else {
      auto keys = [](const std::string& body) {
        std::vector<std::string> k;
        const auto parsed = json::parse(body);
        for (const auto& [key, _] : parsed.items()) k.push_back(key);
        std::sort(k.begin(), k.end());
        return join(k, ",");
      };
      if (keys(reqs[0].body) != "messages,model,temperature") problems.push_back("keys " + keys(reqs[0].body));
      if (keys(reqs[1].body) != "max_tokens,messages,model,temperature") problems.push_back("keys " + keys(reqs[1].body));
      if (reqs[0].path != "/v1/chat/completions") problems.push_back("path " + reqs[0].path);
      const auto m = json::parse(reqs[0].body)["messages"];
      if (m != json::parse(R"([{"role":"user","content":"hello"}])")) problems.push_back("messages " + m.dump());
    }
  }
  int attempts = 0;
  {
    test_support::StubServer stub("third time");
    stub.enqueue(429, R"({"error": "rate limited"})");
    stub.enqueue(429, R"({"error": "rate limited"})");
    HttpBackendSpec spec;
    spec.base_url = stub.base_url();
    std::vector<std::chrono::milliseconds> waits;
    HttpBackend backend(spec, [&](std::chrono::milliseconds d) { waits.push_back(d); });
    const std::vector<ChatMessage> msgs{{Role::user, "hello"}};
    const auto reply = backend.open_session()->complete(msgs, {});
    attempts = static_cast<int>(stub.requests().size());
    if (reply != "third time" || attempts != 3 || waits.size() != 2)
      problems.push_back("retry: reply '" + reply + "' after " + std::to_string(attempts) + " attempts");
  }
  if (!problems.empty()) return {false, join(problems, "; ")};
  return {true, "bodies carry exactly {model, messages, temperature[, max_tokens]}; 429, 429, 200 succeeded on attempt " +
                    std::to_string(attempts)};
}

Outcome log_contracts() {
  TempDir dir("acc10");
  std::vector<std::string> problems;
  const auto train_dir = dir / "training_logs";
  std::filesystem::create_directories(train_dir);

  // builtin tasks: convex, synthetic, toy, each with random configs
  int builtin_logs = 0;
  std::vector<std::pair<std::string, ExperimentPlan>> plans;
  for (const char* name : {"convex_random.plan.json", "synthetic_http.plan.json", "toy_agent.plan.json"}) {
    auto plan = load_plan(source_path("plans/" + std::string(name)));
    PlanOverrides o;
    o.strategy = "random";
    o.trials = 4;
    o.runs = 2;
    o.mode = "direct";
    o.out = dir / "runs" / plan.task.id;
    apply_overrides(plan, o);
    plans.emplace_back(name, plan);
  }
  for (const auto& [name, plan] : plans) {
    Rng rng(17);
    for (int i = 0; i < 5; ++i) {
      const auto config = random_propose(plan.space, rng);
      auto env = ExecutorEnv::in_dir(dir / "work");
      env.goal_metric = plan.task.goal_metric;
      env.launcher = builtin_launcher(plan.task, plan.space, 100 + i);
      write_file_atomic(env.config_path, config_to_json(config).dump());
      try {
        run_task(plan.task, plan.space, config, env, 100 + i);
      } catch (const DivergenceDetected&) {
        continue;
      }
      const auto text = read_file(env.train_log_path);
      const auto issues = check_training_log(json::parse(text), plan.task.goal_metric);
      for (const auto& issue : issues) problems.push_back(name + ": " + issue);
      write_file_atomic(train_dir / (plan.task.id + "_" + std::to_string(i) + ".json"), text);
      ++builtin_logs;
    }
    run_experiment(plan, RunPolicy::serial);
  }

  // serialize then deserialize is the identity on generated logs
  Rng rng(10);
  int identical = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto log = test_support::random_log(rng);
    const auto text = serialize_log_text(log);
    const auto back = deserialize_log(text);
    if (back == log && serialize_log_text(back) == text) {
      ++identical;
    } else if (problems.size() < 5) {
      problems.push_back("round trip " + std::to_string(i) + " differs");
    }
    if (i < 20) write_file_atomic(dir / "generated" / ("log_" + std::to_string(i) + ".json"), text);
  }

  const auto [code, out] = run_command("python3 '" + source_path("tools/validate_schemas.py") + "' --schemas '" +
                                       source_path("schemas") + "' --run-log-dir '" + (dir / "runs").string() +
                                       "' --run-log-dir '" + (dir / "generated").string() +
                                       "' --training-log-dir '" + train_dir.string() + "'");
  if (code != 0) problems.push_back("schema validation exited " + std::to_string(code) + ": " + trim(out));
  if (!problems.empty()) return {false, join(problems, "; ")};
  return {true, std::to_string(builtin_logs) + " builtin training logs pass the contract check; " +
                    std::to_string(identical) + "/1000 round trips identical; " + trim(out)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"random-search coverage", coverage_claim},
      {"convex probe, agent loop end-to-end", convex_agent},
      {"TPE vs random on the convex probe", tpe_vs_random},
      {"optimization loop fidelity", loop_fidelity},
      {"OPRO ablation contract", opro_contract},
      {"milestone protocol", milestone_protocol},
      {"prompt fidelity", prompt_fidelity},
      {"ReAct parser round trip", react_round_trip},
      {"wire-format conformance", wire_format},
      {"log and trainer contracts", log_contracts},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << i + 1 << " " << criteria[i].first << ": " << o.detail << std::endl;
  }
  return failures ? 1 : 0;
}
