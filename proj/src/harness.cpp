#include "hpoloop/harness.hpp"

#include <cstdio>
#include <exception>

#include "hpoloop/baselines.hpp"
#include "hpoloop/creator.hpp"
#include "hpoloop/errors.hpp"
#include "hpoloop/executor.hpp"
#include "hpoloop/text_util.hpp"
#include "hpoloop/transcript.hpp"

namespace hpoloop {

std::filesystem::path run_directory(const ExperimentPlan& plan, int run_index) {
  char name[32];
  std::snprintf(name, sizeof name, "run_%03d", run_index);
  return plan.output_dir / "runs" / name;
}

namespace {

std::string trial_file_name(int t) {
  char name[32];
  std::snprintf(name, sizeof name, "trial_%03d.json", t);
  return name;
}

void mark_aborted(ExperimentLog& log, const std::string& reason) {
  log.metadata.aborted = true;
  log.metadata.abort_reason = reason;
  log.metadata.finished_at = utc_timestamp_now();
  log.persist();
}

}  // namespace

ExperimentLog run_single(const ExperimentPlan& plan, int run_index, const ChatBackend* backend) {
  if (run_index < 0 || run_index >= plan.n_runs) throw PlanError("run index out of range");
  const std::uint64_t seed = plan.seeds[run_index];
  const auto dir = run_directory(plan, run_index);
  const auto log_path = dir / "run_log.json";
  std::filesystem::create_directories(dir / "work");
  std::filesystem::create_directories(dir / "transcripts");

  ExperimentLog log;
  if (plan.resume && std::filesystem::exists(log_path)) {
    log = load_log(log_path);
    if (log.metadata.seed != seed) throw PlanError("cannot resume " + log_path.string() + ": seed differs");
    if (static_cast<int>(log.size()) > plan.trials_per_run)
      throw PlanError("cannot resume " + log_path.string() + ": it holds more trials than planned");
    log.metadata.aborted = false;
    log.metadata.abort_reason.clear();
  } else {
    RunMetadata meta;
    meta.task_id = plan.task.id;
    meta.space_id = plan.space_id;
    meta.strategy = plan.strategy.name;
    meta.seed = seed;
    meta.run_index = run_index;
    meta.goal_metric = plan.task.goal_metric;
    meta.direction = plan.task.direction;
    meta.started_at = utc_timestamp_now();
    log = ExperimentLog(meta);
  }
  log.attach_file(log_path);
  if (static_cast<int>(log.size()) == plan.trials_per_run && log.final_analysis) return log;
  log.persist();

  auto strategy = make_strategy(plan.strategy.name, plan.strategy.params);
  std::unique_ptr<ChatSession> session;
  std::optional<RecordingSession> recorder;
  if (plan.needs_llm()) {
    if (!backend) throw PlanError("this plan needs a backend");
    session = backend->open_session();
    recorder.emplace(*session);
  }
  ChatSession* chat = recorder ? &*recorder : nullptr;
  CreatorContext creator_ctx{chat, plan.backend.creator_params, plan.backend.limits, plan.background,
                             plan.strategy.name == "opro" ? LogView::opro : LogView::full};
  AgentContext executor_ctx{chat, plan.backend.executor_params, plan.backend.limits};

  ExecutorEnv env = ExecutorEnv::in_dir(dir / "work");
  env.goal_metric = plan.task.goal_metric;
  env.timeout = plan.train_timeout;
  if (plan.task.kind == TaskKind::external)
    env.train_command = std::get<ExternalParams>(plan.task.params).command;
  if (!std::filesystem::exists(env.config_path)) write_file_atomic(env.config_path, "{}\n");

  auto save_transcript = [&](const std::string& file, std::vector<TranscriptSection> sections)
      -> std::optional<std::string> {
    if (!recorder) return std::nullopt;
    write_transcript(dir / "transcripts" / file, sections);
    return "transcripts/" + file;
  };

  for (int t = static_cast<int>(log.size()) + 1; t <= plan.trials_per_run; ++t) {
    // per-trial streams keep a resumed run identical to an uninterrupted one
    const std::uint64_t trial_seed = derive_run_seed(seed, t);
    Rng rng(trial_seed);
    LogEntry entry;
    entry.trial_index = t;
    entry.started_at = utc_timestamp_now();

    Proposal proposal;
    try {
      proposal = strategy->propose(StrategyContext{plan.space, log, rng, &creator_ctx});
    } catch (const ProposalError& e) {
      if (recorder) save_transcript(trial_file_name(t), {{"creator", recorder->take()}});
      mark_aborted(log, e.code() + ": " + e.what());
      return log;
    }
    std::vector<TranscriptSection> sections;
    if (recorder) sections.push_back({"creator", recorder->take()});

    if (plan.task.kind != TaskKind::external) env.launcher = builtin_launcher(plan.task, plan.space, trial_seed);
    try {
      entry.result = execute(proposal.config, env, plan.space, plan.task.direction, plan.executor_mode,
                             plan.executor_mode == ExecutorMode::agentic ? &executor_ctx : nullptr);
    } catch (const Error& e) {
      if (recorder) {
        sections.push_back({"executor", recorder->take()});
        save_transcript(trial_file_name(t), sections);
      }
      mark_aborted(log, e.code() + ": " + e.what());
      return log;
    }
    if (recorder && plan.executor_mode == ExecutorMode::agentic)
      sections.push_back({"executor", recorder->take()});

    entry.config = proposal.config;
    entry.rationale = proposal.rationale;
    entry.transcript_ref = save_transcript(trial_file_name(t), sections);
    entry.finished_at = utc_timestamp_now();
    log.append(std::move(entry));
  }

  if (best_so_far(log, plan.trials_per_run, plan.task.direction)) {
    if (strategy->uses_llm()) {
      try {
        log.final_analysis = analyze(log, plan.space, creator_ctx);
      } catch (const ProposalError& e) {
        log.final_analysis = local_final_analysis(log);
        log.final_analysis->best_reasoning = std::string("analysis request failed: ") + e.what();
      }
      save_transcript("analysis.json", {{"analysis", recorder->take()}});
    } else {
      log.final_analysis = local_final_analysis(log);
    }
  }
  log.metadata.finished_at = utc_timestamp_now();
  log.persist();
  return log;
}

ExperimentResult run_experiment(const ExperimentPlan& plan, RunPolicy policy, const ChatBackend* backend) {
  plan.check();
  std::filesystem::create_directories(plan.output_dir);
  std::unique_ptr<ChatBackend> owned;
  if (!backend && plan.needs_llm()) {
    owned = make_backend(*plan.backend.spec);
    backend = owned.get();
  }

  const int n = plan.n_runs;
  std::vector<std::optional<ExperimentLog>> logs(n);
  std::vector<std::exception_ptr> errors(n);
  auto body = [&](int i) {
    try {
      logs[i] = run_single(plan, i, backend);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (policy == RunPolicy::parallel) {
#pragma omp parallel for schedule(dynamic, 1) num_threads(plan.workers)
    for (int i = 0; i < n; ++i) body(i);
  } else {
    for (int i = 0; i < n; ++i) body(i);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ExperimentResult result;
  for (auto& l : logs) result.logs.push_back(std::move(*l));
  result.report = milestone_report(result.logs, plan.milestones, plan.task.direction);
  result.report.strategy = plan.strategy.name;
  write_file_atomic(plan.output_dir / "report.json", report_to_json(result.report).dump(2) + "\n");
  write_file_atomic(plan.output_dir / "report.txt", format_report_table(result.report));
  write_file_atomic(plan.output_dir / "trajectories.csv", trajectory_csv(result.logs, plan.task.direction));
  if (result.report.run_count == 0) {
    throw ExperimentFailed("all " + std::to_string(n) + " runs aborted; first reason: " +
                           result.logs.front().metadata.abort_reason);
  }
  return result;
}

std::vector<ExperimentLog> load_run_logs(const std::filesystem::path& dir) {
  const auto runs = dir / "runs";
  if (!std::filesystem::is_directory(runs)) throw FileMissing("no runs directory under " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(runs)) {
    const auto f = e.path() / "run_log.json";
    if (e.is_directory() && std::filesystem::exists(f)) files.push_back(f);
  }
  std::sort(files.begin(), files.end());
  std::vector<ExperimentLog> logs;
  for (const auto& f : files) logs.push_back(load_log(f));
  std::stable_sort(logs.begin(), logs.end(), [](const ExperimentLog& a, const ExperimentLog& b) {
    return a.metadata.run_index < b.metadata.run_index;
  });
  return logs;
}

MilestoneReport report_from_dir(const std::filesystem::path& dir, std::optional<std::vector<int>> milestones) {
  const auto logs = load_run_logs(dir);
  if (logs.empty()) throw FileMissing("no run logs under " + dir.string());
  if (!milestones && std::filesystem::exists(dir / "report.json")) {
    milestones = report_from_json(json::parse(read_file(dir / "report.json"))).milestones;
  }
  if (!milestones) {
    std::size_t longest = 0;
    for (const auto& l : logs) longest = std::max(longest, l.size());
    milestones = std::vector<int>{};
    for (int t : {1, 3, 5, 10}) {
      if (t <= static_cast<int>(longest)) milestones->push_back(t);
    }
    if (milestones->empty()) milestones->push_back(1);
  }
  auto report = milestone_report(logs, *milestones, logs.front().metadata.direction);
  report.strategy = logs.front().metadata.strategy;
  return report;
}

ComparisonTable compare(const std::vector<std::pair<std::string, MilestoneReport>>& reports) {
  if (reports.empty()) throw MilestoneMismatch("nothing to compare");
  ComparisonTable table;
  table.milestones = reports.front().second.milestones;
  table.direction = reports.front().second.direction;
  for (const auto& [name, r] : reports) {
    if (r.milestones != table.milestones)
      throw MilestoneMismatch("report '" + name + "' uses different milestones");
    if (r.direction != table.direction)
      throw MilestoneMismatch("report '" + name + "' optimizes in the other direction");
    table.strategies.push_back(name);
  }
  for (std::size_t row = 0; row < table.milestones.size(); ++row) {
    std::vector<std::optional<std::pair<double, double>>> cells;
    std::optional<std::size_t> best;
    for (std::size_t col = 0; col < reports.size(); ++col) {
      const auto& r = reports[col].second.rows[row];
      if (r.mean) {
        cells.emplace_back(std::pair{*r.mean, r.sample_std});
        if (!best || better(table.direction, *r.mean, cells[*best]->first)) best = col;
      } else {
        cells.emplace_back(std::nullopt);
      }
    }
    table.cells.push_back(std::move(cells));
    table.best_column.push_back(best);
  }
  return table;
}

namespace {

std::string cell_text(const std::pair<double, double>& c) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.6g ± %.4g", c.first, c.second);
  return buf;
}

}  // namespace

std::string format_comparison(const ComparisonTable& table) {
  std::string out = "| t |";
  std::string rule = "|---|";
  for (const auto& s : table.strategies) {
    out += " " + s + " |";
    rule += "---|";
  }
  out += "\n" + rule + "\n";
  for (std::size_t row = 0; row < table.milestones.size(); ++row) {
    out += "| " + std::to_string(table.milestones[row]) + " |";
    for (std::size_t col = 0; col < table.strategies.size(); ++col) {
      const auto& c = table.cells[row][col];
      std::string text = c ? cell_text(*c) : "-";
      if (c && table.best_column[row] == col) text = "**" + text + "**";
      out += " " + text + " |";
    }
    out += "\n";
  }
  out += "\ndirection: " + std::string(to_string(table.direction)) +
         "; cells are mean ± sample std across runs; bold marks the best mean per row\n";
  return out;
}

json comparison_to_json(const ComparisonTable& table) {
  json rows = json::array();
  for (std::size_t row = 0; row < table.milestones.size(); ++row) {
    json cells = json::array();
    for (const auto& c : table.cells[row]) {
      cells.push_back(c ? json{{"mean", c->first}, {"std", c->second}} : json(nullptr));
    }
    rows.push_back({{"t", table.milestones[row]},
                    {"cells", std::move(cells)},
                    {"best", table.best_column[row] ? json(table.strategies[*table.best_column[row]]) : json(nullptr)}});
  }
  return json{{"strategies", table.strategies},
              {"direction", std::string(to_string(table.direction))},
              {"rows", std::move(rows)}};
}

}  // namespace hpoloop
