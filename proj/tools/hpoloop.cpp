#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hpoloop/creator.hpp"
#include "hpoloop/errors.hpp"
#include "hpoloop/executor.hpp"
#include "hpoloop/harness.hpp"
#include "hpoloop/plan.hpp"
#include "hpoloop/react.hpp"
#include "hpoloop/text_util.hpp"
#include "hpoloop/transcript.hpp"

namespace fs = std::filesystem;
using namespace hpoloop;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitFailed = 2;

std::vector<int> parse_milestones(const std::string& text) {
  std::vector<int> out;
  for (const auto& part : split(text, ',')) {
    const auto v = parse_number(trim(part));
    if (!v || *v < 1 || *v != static_cast<int>(*v)) throw PlanError("bad milestone '" + part + "'");
    out.push_back(static_cast<int>(*v));
  }
  return out;
}

void print_error(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    std::cerr << "error: " << err->code() << ": " << err->what() << "\n";
    if (const auto* v = dynamic_cast<const ValidationError*>(&e)) {
      for (const auto& x : v->violations()) std::cerr << "  " << x.name << " = " << x.value << ": " << x.constraint << "\n";
    }
  } else {
    std::cerr << "error: " << e.what() << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LLM-agent hyperparameter optimization loop"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run an experiment plan");
  std::string plan_path;
  PlanOverrides overrides;
  std::string out_dir;
  bool serial = false;
  run->add_option("plan", plan_path, "Plan file")->required();
  run->add_option("--strategy", overrides.strategy, "random | tpe | agent | opro");
  run->add_option("--trials", overrides.trials, "Trials per run");
  run->add_option("--runs", overrides.runs, "Number of runs");
  run->add_option("--seed", overrides.seed, "Master seed");
  run->add_option("--backend", overrides.backend, "none | http | scripted:<path> | mock:bisect-refine");
  run->add_option("--mode", overrides.mode, "Executor mode: direct | agentic");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--workers", overrides.workers, "Runs executed concurrently");
  run->add_flag("--serial", serial, "Run the seeds one after another");

  // report
  auto* report = app.add_subcommand("report", "Recompute the milestone report of an output directory");
  std::string report_dir, report_milestones;
  bool report_json = false;
  report->add_option("dir", report_dir, "Output directory of a run")->required();
  report->add_option("--milestones", report_milestones, "Comma separated trial marks");
  report->add_flag("--json", report_json, "Print JSON");

  // compare
  auto* cmp = app.add_subcommand("compare", "Compare strategies side by side");
  std::vector<std::string> cmp_dirs;
  std::string cmp_milestones;
  bool cmp_json = false;
  cmp->add_option("dirs", cmp_dirs, "Output directories, optionally as name=dir")->required();
  cmp->add_option("--milestones", cmp_milestones, "Comma separated trial marks");
  cmp->add_flag("--json", cmp_json, "Print JSON");

  // validate
  auto* validate = app.add_subcommand("validate", "Check a plan without running it");
  std::string validate_path;
  validate->add_option("plan", validate_path, "Plan file")->required();

  // render-prompt
  auto* render = app.add_subcommand("render-prompt", "Print the prompt an agent would receive");
  std::string render_plan, render_which = "creator", render_log, render_config;
  render->add_option("plan", render_plan, "Plan file")->required();
  render->add_option("--which", render_which, "creator | executor")
      ->check(CLI::IsMember({"creator", "executor"}));
  render->add_option("--log", render_log, "Run log whose history the creator would load");
  render->add_option("--config", render_config, "JSON config for the executor task (default: midpoint)");

  // replay
  auto* replay = app.add_subcommand("replay", "Re-parse a recorded transcript");
  std::string replay_path;
  replay->add_option("transcript", replay_path, "Transcript file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (!out_dir.empty()) overrides.out = fs::path(out_dir);
      auto plan = load_plan(plan_path);
      apply_overrides(plan, overrides);
      for (const auto& w : plan_warnings(plan)) std::cerr << "warning: " << w << "\n";
      try {
        const auto result = run_experiment(plan, serial ? RunPolicy::serial : RunPolicy::parallel);
        std::cout << format_report_table(result.report);
        for (const auto& log : result.logs) {
          if (log.metadata.aborted)
            std::cerr << "run " << log.metadata.run_index << " aborted: " << log.metadata.abort_reason << "\n";
        }
        std::cout << "output: " << plan.output_dir.string() << "\n";
      } catch (const ExperimentFailed& e) {
        print_error(e);
        return kExitFailed;
      }
      return kExitOk;
    }
    if (*report) {
      std::optional<std::vector<int>> ms;
      if (!report_milestones.empty()) ms = parse_milestones(report_milestones);
      const auto r = report_from_dir(report_dir, ms);
      std::cout << (report_json ? report_to_json(r).dump(2) + "\n" : format_report_table(r));
      return kExitOk;
    }
    if (*cmp) {
      std::optional<std::vector<int>> ms;
      if (!cmp_milestones.empty()) ms = parse_milestones(cmp_milestones);
      std::vector<std::pair<std::string, MilestoneReport>> reports;
      for (const auto& arg : cmp_dirs) {
        const auto eq = arg.find('=');
        const std::string dir = eq == std::string::npos ? arg : arg.substr(eq + 1);
        auto r = report_from_dir(dir, ms);
        const std::string name = eq == std::string::npos ? r.strategy : arg.substr(0, eq);
        reports.emplace_back(name, std::move(r));
      }
      const auto table = compare(reports);
      std::cout << (cmp_json ? comparison_to_json(table).dump(2) + "\n" : format_comparison(table));
      return kExitOk;
    }
    if (*validate) {
      const auto plan = load_plan(validate_path);
      for (const auto& w : plan_warnings(plan)) std::cout << "warning: " << w << "\n";
      std::cout << "ok: task " << plan.task.id << " (" << to_string(plan.task.kind) << "), strategy "
                << plan.strategy.name << ", " << plan.n_runs << " run(s) x " << plan.trials_per_run
                << " trial(s), backend " << plan.backend.label << "\n";
      return kExitOk;
    }
    if (*render) {
      const auto plan = load_plan(render_plan);
      if (render_which == "creator") {
        const PromptFrame frame{std::string(kCreatorJsonInstruction), build_creator_prompt(plan.background)};
        for (const auto& m : build_messages(frame, "")) {
          std::cout << "[" << to_string(m.role) << "]\n" << m.content << "\n";
        }
        if (!render_log.empty()) {
          const auto log = load_log(render_log);
          const LogView view = plan.strategy.name == "opro" ? LogView::opro : LogView::full;
          std::cout << "[" << kLoadHistoricalLogsTool << " observation]\n"
                    << render_log_for_creator(log, view) << "\n";
        }
      } else {
        const auto config = render_config.empty()
                                ? midpoint_config(plan.space)
                                : validate_config(plan.space, config_from_json(json::parse(render_config)));
        const PromptFrame frame{"", build_executor_prompt(executor_task_text(config))};
        for (const auto& m : build_messages(frame, "")) std::cout << m.content << "\n";
      }
      return kExitOk;
    }
    if (*replay) {
      const auto r = replay_transcript(load_transcript(replay_path));
      std::cout << format_replay(r);
      return r.format_failures == 0 ? kExitOk : kExitFailed;
    }
  } catch (const std::exception& e) {
    print_error(e);
    return kExitConfig;
  }
  return kExitOk;
}
