#include "hpoloop/creator.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include "hpoloop/errors.hpp"
#include "hpoloop/executor.hpp"
#include "hpoloop/templates.hpp"
#include "hpoloop/text_util.hpp"

namespace hpoloop {

const std::string_view kCreatorJsonInstruction =
    "When you give the Final Answer, explain your choice in prose and end with a single JSON "
    "object that maps every hyper-parameter name to its proposed value, for example "
    "{\"learning_rate\": 0.001, \"optimizer\": \"adam\"}.";

const std::string_view kAnalysisRequestMarker =
    "Write the final analysis of this hyper-parameter optimization experiment.";

const std::string_view kEmptyLogSentinel = "No experiments recorded yet.";

namespace {

constexpr std::string_view kSectionBest = "Best Hyper-Parameter Found in Experiment";
constexpr std::string_view kSectionInfluence = "Influence of Each Hyper-Parameter";
constexpr std::string_view kSectionFuture = "Potential Future Exploration Direction";

}  // namespace

void BackgroundInfo::check() const {
  std::vector<std::string> empty;
  if (trim(model_info).empty()) empty.push_back("model_info");
  if (trim(dataset_info).empty()) empty.push_back("dataset_info");
  if (trim(goal.goal_text).empty()) empty.push_back("goal_text");
  if (trim(goal.metric_name).empty()) empty.push_back("metric_name");
  if (trim(hp_info).empty()) empty.push_back("hp_info");
  if (!empty.empty()) throw SchemaError("background info has empty sections: " + join(empty, ", "));
}

BackgroundInfo make_background(std::string model_info, std::string dataset_info,
                               OptimizationGoal goal, const SearchSpace& space,
                               DescribeOptions options) {
  return BackgroundInfo{std::move(model_info), std::move(dataset_info), std::move(goal),
                        describe_for_prompt(space, options)};
}

std::string build_creator_prompt(const BackgroundInfo& background,
                                 const std::vector<std::string>& tool_names) {
  return render_template(kCreatorTemplate,
                         {{"model_info", background.model_info},
                          {"dataset_info", background.dataset_info},
                          {"hyperparameter_info", background.hp_info},
                          {"tool_names", join(tool_names, ", ")},
                          {"optim_goal", background.goal.goal_text}},
                         {"agent_scratchpad"});
}

std::string_view to_string(LogView v) { return v == LogView::full ? "full" : "opro"; }

// ---------------------------------------------------------------------------
// log rendering

std::string render_log_for_creator(const ExperimentLog& log, LogView view) {
  const auto& meta = log.metadata;
  std::string out = "Optimization direction: " + std::string(to_string(meta.direction)) +
                    " (metric: " + meta.goal_metric + ")\n";
  if (log.empty()) return out + std::string(kEmptyLogSentinel) + "\n";

  if (view == LogView::opro) {
    std::vector<const LogEntry*> scored;
    for (const auto& e : log.entries()) {
      if (e.result.final_score) scored.push_back(&e);
    }
    if (scored.empty()) return out + "No scored experiments yet.\n";
    // best last: ascending when maximizing, descending when minimizing
    std::stable_sort(scored.begin(), scored.end(), [&](const LogEntry* a, const LogEntry* b) {
      return better(meta.direction, *b->result.final_score, *a->result.final_score);
    });
    out += "Hyper-parameter and score pairs, best last:\n";
    for (const auto* e : scored) {
      out += "\nHyper-parameters: " + config_to_text(e->config) +
             "\nScore: " + format_number(*e->result.final_score) + "\n";
    }
    return out;
  }

  for (const auto& e : log.entries()) {
    const auto& r = e.result;
    out += "\nTrial " + std::to_string(e.trial_index) + "\n";
    out += "Hyper-parameters: " + config_to_text(e.config) + "\n";
    out += "Rationale: " + e.rationale + "\n";
    out += "Training Trajectory:\n";
    if (r.trajectory) {
      out += render_trajectory(*r.trajectory, meta.goal_metric) + "\n";
    } else {
      out += "none, the trial failed (" + trim(r.error) + ")\n";
    }
    if (!r.analysis_text.empty()) out += "Analysis: " + r.analysis_text + "\n";
    out += "Final Score: " + (r.final_score ? format_number(*r.final_score) : std::string("failed")) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// extraction

namespace {

struct JsonSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  json value;
};

// Every balanced {...} substring that parses as a JSON object.
std::vector<JsonSpan> find_json_objects(std::string_view text) {
  std::vector<JsonSpan> found;
  std::size_t i = 0;
  while ((i = text.find('{', i)) != std::string_view::npos) {
    int depth = 0;
    bool in_string = false;
    std::size_t j = i;
    for (; j < text.size(); ++j) {
      const char c = text[j];
      if (in_string) {
        if (c == '\\') ++j;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) break;
    }
    if (j < text.size()) {
      try {
        json v = json::parse(text.substr(i, j - i + 1));
        if (v.is_object()) {
          found.push_back({i, j + 1, std::move(v)});
          i = j + 1;
          continue;
        }
      } catch (const json::parse_error&) {
      }
    }
    ++i;
  }
  return found;
}

std::optional<HyperparameterConfig> config_from_object(const json& obj, const SearchSpace& space) {
  HyperparameterConfig config;
  for (const auto& [key, value] : obj.items()) {
    const HyperparameterSpec* spec = space.find(key);
    if (!spec) continue;
    if (auto v = coerce_json_value(*spec, value)) {
      config.assignments[key] = *v;
    } else if (value.is_string()) {
      config.assignments[key] = value.get<std::string>();
    } else {
      config.assignments[key] = value.dump();
    }
  }
  if (config.assignments.empty()) return std::nullopt;
  return config;
}

struct LineAssignment {
  std::string name;
  std::string value;
};

std::string strip_markdown(std::string s) {
  s = replace_all(std::move(s), "**", "");
  s = replace_all(std::move(s), "`", "");
  return s;
}

std::optional<LineAssignment> parse_assignment_line(std::string_view raw, const SearchSpace& space) {
  static const std::regex bullet(R"(^\s*(?:[-*•+]|\d+[.)])\s+)");
  std::string line = strip_markdown(std::regex_replace(std::string(raw), bullet, ""));
  const auto sep = line.find_first_of(":=");
  if (sep == std::string::npos) return std::nullopt;
  std::string name = strip_quotes(trim(std::string_view(line).substr(0, sep)));
  if (!space.find(name)) return std::nullopt;
  std::string value = trim(std::string_view(line).substr(sep + 1));
  if (const auto hash = value.find(" #"); hash != std::string::npos) value = trim(value.substr(0, hash));
  while (!value.empty() && (value.back() == ',' || value.back() == ';')) value.pop_back();
  value = strip_quotes(trim(value));
  if (value.empty()) return std::nullopt;
  return LineAssignment{std::move(name), std::move(value)};
}

}  // namespace

std::optional<HyperparameterConfig> extract_config(std::string_view text, const SearchSpace& space) {
  const auto objects = find_json_objects(text);
  for (auto it = objects.rbegin(); it != objects.rend(); ++it) {
    if (auto c = config_from_object(it->value, space)) return c;
  }
  HyperparameterConfig config;
  for (const auto& line : split_lines(text)) {
    auto a = parse_assignment_line(line, space);
    if (!a) continue;
    const HyperparameterSpec& spec = *space.find(a->name);
    if (auto v = coerce_value(spec, a->value)) config.assignments[a->name] = *v;
    else config.assignments[a->name] = a->value;
  }
  if (config.assignments.empty()) return std::nullopt;
  return config;
}

std::string strip_assignments(std::string_view text, const SearchSpace& space) {
  std::string s(text);
  const auto objects = find_json_objects(s);
  for (auto it = objects.rbegin(); it != objects.rend(); ++it) {
    if (config_from_object(it->value, space)) s.erase(it->begin, it->end - it->begin);
  }
  std::vector<std::string> kept;
  for (const auto& line : split_lines(s)) {
    const std::string t = trim(line);
    if (t.starts_with("```")) continue;
    if (parse_assignment_line(line, space)) continue;
    kept.push_back(line);
  }
  return trim(join(kept, "\n"));
}

// ---------------------------------------------------------------------------
// validation and repair

bool is_duplicate(const HyperparameterConfig& config, const ExperimentLog& log) {
  for (const auto& e : log.entries()) {
    if (e.config == config) return true;
  }
  return false;
}

namespace {

std::vector<std::string> violations_of(const HyperparameterConfig& config, const SearchSpace& space,
                                       const ExperimentLog& log) {
  try {
    const auto v = validate_config(space, config, ValidationMode::reject);
    if (is_duplicate(v, log)) return {"the configuration " + config_to_text(v) + " was already tested"};
    return {};
  } catch (const ValidationError& e) {
    std::vector<std::string> out;
    for (const auto& v : e.violations()) {
      out.push_back(v.name + " = " + (v.value.empty() ? "<missing>" : v.value) + " (expected " +
                    v.constraint + ")");
    }
    return out;
  }
}

HpValue repair_value(const HyperparameterSpec& spec, const HpValue* v, Rng& rng) {
  if (!v) return sample_value(spec, rng);
  if (spec.numeric()) {
    if (!is_numeric(*v)) return sample_value(spec, rng);
    double x = as_double(*v);
    if (!std::isfinite(x)) return sample_value(spec, rng);
    x = std::clamp(x, spec.lower, spec.upper);
    if (spec.kind == HpKind::integer) {
      x = std::clamp(std::round(x), std::ceil(spec.lower), std::floor(spec.upper));
      return static_cast<std::int64_t>(x);
    }
    return x;
  }
  for (const auto& c : spec.choices) {
    if (value_equal(c, *v)) return c;
  }
  return sample_value(spec, rng);
}

}  // namespace

HyperparameterConfig repair_proposal(const HyperparameterConfig& proposal,
                                     const SearchSpace& space, const ExperimentLog& log, Rng& rng) {
  HyperparameterConfig out;
  for (const auto& spec : space.specs())
    out.assignments[spec.name] = repair_value(spec, proposal.get(spec.name), rng);
  if (!is_duplicate(out, log)) return out;
  constexpr int kTriesPerHp = 32;
  for (const auto& spec : space.specs()) {
    for (int k = 0; k < kTriesPerHp; ++k) {
      HyperparameterConfig candidate = out;
      candidate.assignments[spec.name] = sample_value(spec, rng);
      if (!is_duplicate(candidate, log)) return candidate;
    }
  }
  // Small discrete spaces: fall back to whole-config draws.
  for (int k = 0; k < 1024; ++k) {
    auto candidate = sample_uniform(space, rng);
    if (!is_duplicate(candidate, log)) return candidate;
  }
  throw ProposalError("could not find a configuration that differs from every logged one");
}

// ---------------------------------------------------------------------------
// create

namespace {

std::string concatenated_thoughts(const AgentOutcome& o) {
  std::vector<std::string> parts;
  for (const auto& s : o.transcript) {
    if (!trim(s.thought).empty()) parts.push_back(trim(s.thought));
  }
  if (!trim(o.final_thought).empty()) parts.push_back(trim(o.final_thought));
  return join(parts, "\n");
}

template <class Fn>
auto backend_call(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const NetworkError& e) {
    throw ProposalError(std::string("backend failure: ") + e.what());
  } catch (const ApiError& e) {
    throw ProposalError(std::string("backend failure: ") + e.what());
  } catch (const TranscriptExhausted& e) {
    throw ProposalError(std::string("backend failure: ") + e.what());
  } catch (const MalformedResponse& e) {
    throw ProposalError(std::string("backend failure: ") + e.what());
  }
}

}  // namespace

Proposal create(const ExperimentLog& log, const SearchSpace& space, const CreatorContext& ctx,
                Rng& rng) {
  if (!ctx.session) throw SchemaError("the creator needs a chat session");
  ctx.background.check();
  const PromptFrame frame{std::string(kCreatorJsonInstruction), build_creator_prompt(ctx.background)};
  ToolRegistry tools;
  tools.add({std::string(kLoadHistoricalLogsTool), "Load the experimental logs.",
             [&log, &ctx](std::string_view) { return render_log_for_creator(log, ctx.view); }});

  std::optional<HyperparameterConfig> last;
  std::string rationale;
  std::string seed;
  constexpr int kAttempts = 2;
  for (int attempt = 1; attempt <= kAttempts; ++attempt) {
    AgentOutcome outcome;
    try {
      outcome = backend_call([&] { return run_loop(*ctx.session, ctx.params, frame, seed, tools, ctx.limits); });
    } catch (const StepBudgetExceeded& e) {
      seed = "My previous attempt was rejected: " + std::string(e.what()) +
             ". I must give a Final Answer with a valid configuration.\n";
      continue;
    }
    auto extracted = extract_config(outcome.final_answer, space);
    std::string prose = strip_assignments(outcome.final_answer, space);
    if (prose.empty()) prose = concatenated_thoughts(outcome);
    if (!extracted) {
      seed = "My previous Final Answer was rejected: it contained no recognizable "
             "hyper-parameter assignments. I must state every hyper-parameter as a JSON object.\n";
      continue;
    }
    last = extracted;
    rationale = prose;
    const auto problems = violations_of(*extracted, space, log);
    if (problems.empty()) {
      return Proposal{validate_config(space, *extracted), rationale.empty() ? "(no rationale given)" : rationale,
                      attempt, false};
    }
    seed = "My previous proposal was rejected: " + join(problems, "; ") +
           ". I must propose a valid configuration that differs from every tested one.\n";
  }
  if (!last) throw ProposalError("the Final Answer contained no recognizable assignments after a reprompt");
  return Proposal{repair_proposal(*last, space, log, rng),
                  rationale.empty() ? "(no rationale given)" : rationale, kAttempts, true};
}

// ---------------------------------------------------------------------------
// analyze

std::string build_analysis_prompt(const BackgroundInfo& background, const ExperimentLog& log,
                                  LogView view) {
  std::string out(kAnalysisRequestMarker);
  out += "\n\nModel information:\n" + background.model_info + "\n\nDataset information:\n" +
         background.dataset_info + "\n\nObjective: " + background.goal.goal_text +
         "\n\nHyper-parameters:\n" + background.hp_info + "\n\nExperimental logs:\n" +
         render_log_for_creator(log, view) +
         "\nAnswer with exactly these three numbered sections:\n1. " + std::string(kSectionBest) +
         ": give the best configuration as a JSON object and explain why it worked best.\n2. " +
         std::string(kSectionInfluence) + ": describe how each hyper-parameter affected the "
         "result.\n3. " + std::string(kSectionFuture) + ": suggest what to explore next.\n";
  return out;
}

namespace {

// Text between a heading and the next heading (or the end).
std::string section(const std::string& text, std::string_view heading,
                    std::initializer_list<std::string_view> others) {
  const auto pos = text.find(heading);
  if (pos == std::string::npos) return "";
  std::size_t start = pos + heading.size();
  while (start < text.size() && (text[start] == ':' || text[start] == '*' || text[start] == '#'))
    ++start;
  std::size_t end = text.size();
  for (auto o : others) {
    const auto p = text.find(o, start);
    if (p != std::string::npos) {
      // back up over the "2. " style numbering that precedes the heading
      auto line_start = text.rfind('\n', p);
      end = std::min(end, line_start == std::string::npos || line_start < start ? p : line_start);
    }
  }
  return trim(std::string_view(text).substr(start, end - start));
}

std::optional<std::pair<const LogEntry*, double>> argbest(const ExperimentLog& log) {
  auto b = best_so_far(log, static_cast<int>(log.size()), log.metadata.direction);
  if (!b) return std::nullopt;
  return std::pair{&log.entries()[b->trial_index - 1], b->score};
}

}  // namespace

FinalAnalysis local_final_analysis(const ExperimentLog& log) {
  if (log.empty()) throw EmptyLog("cannot analyze an empty log");
  auto best = argbest(log);
  if (!best) throw EmptyLog("no trial in the log succeeded");
  FinalAnalysis a;
  a.best_config = best->first->config;
  a.best_trial = best->first->trial_index;
  a.best_score = best->second;
  a.best_reasoning = "n/a (non-agent strategy)";
  a.influence_notes = "n/a (non-agent strategy)";
  a.future_directions = "n/a (non-agent strategy)";
  return a;
}

FinalAnalysis analyze(const ExperimentLog& log, const SearchSpace& space, const CreatorContext& ctx) {
  FinalAnalysis a = local_final_analysis(log);
  if (!ctx.session) throw SchemaError("the creator needs a chat session");
  const std::vector<ChatMessage> messages{
      {Role::user, build_analysis_prompt(ctx.background, log, ctx.view)}};
  const std::string reply =
      backend_call([&] { return ctx.session->complete(messages, ctx.params); });

  a.best_reasoning = section(reply, kSectionBest, {kSectionInfluence, kSectionFuture});
  a.influence_notes = section(reply, kSectionInfluence, {kSectionFuture});
  a.future_directions = section(reply, kSectionFuture, {});
  if (a.best_reasoning.empty() && a.influence_notes.empty() && a.future_directions.empty())
    a.best_reasoning = trim(reply);

  if (auto claimed = extract_config(a.best_reasoning, space)) {
    bool agrees = true;
    for (const auto& [name, value] : claimed->assignments) {
      const HpValue* local = a.best_config.get(name);
      if (!local || !value_equal(*local, value)) agrees = false;
    }
    if (!agrees) {
      a.best_reasoning += "\n\nNote: the analysis named " + config_to_text(*claimed) +
                          " as the best configuration, but the log's best trial is trial " +
                          std::to_string(a.best_trial) + " with " + config_to_text(a.best_config) +
                          " (score " + format_number(a.best_score) + "); the log value is kept.";
    }
  }
  return a;
}

}  // namespace hpoloop
