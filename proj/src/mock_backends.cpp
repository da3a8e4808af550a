// Rule-based replies for the "bisect-refine" programmatic backend. The policy
// starts at the midpoint of the space, then probes one dimension per trial
// around the best configuration seen so far, halving that dimension's step
// after each probe and flipping its direction after a failed probe.

#include <algorithm>
#include <cmath>
#include <optional>
#include <regex>

#include "hpoloop/creator.hpp"
#include "hpoloop/errors.hpp"
#include "hpoloop/executor.hpp"
#include "hpoloop/llm_client.hpp"
#include "hpoloop/text_util.hpp"

namespace hpoloop {

namespace {

// What the mock can read back from a rendered HP line.
struct SeenHp {
  std::string name;
  bool discrete = false;
  bool integer = false;
  bool log_scale = false;
  bool bounded = false;
  double lower = 0.0, upper = 0.0;
  std::vector<std::string> choices;
};

struct SeenTrial {
  json config;
  std::optional<double> score;
};

std::vector<std::string> split_list(std::string_view inner) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= inner.size()) {
    const auto comma = inner.find(',', start);
    const auto end = comma == std::string_view::npos ? inner.size() : comma;
    out.push_back(trim(inner.substr(start, end - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<SeenHp> parse_hp_lines(const std::string& prompt) {
  static const std::regex line_re(
      R"(^- ([A-Za-z0-9_.\-]+) \((categorical|integer|float|ordinal)(, log scale)?\)(?:: (range|choices) \[([^\]]*)\])?)");
  std::vector<SeenHp> out;
  for (const auto& line : split_lines(prompt)) {
    std::smatch m;
    if (!std::regex_search(line, m, line_re)) continue;
    SeenHp hp;
    hp.name = m[1];
    const std::string kind = m[2];
    hp.discrete = kind == "categorical" || kind == "ordinal";
    hp.integer = kind == "integer";
    hp.log_scale = m[3].matched;
    if (m[4].matched) {
      const auto items = split_list(m[5].str());
      if (m[4] == "choices") {
        hp.choices = items;
      } else if (items.size() == 2) {
        auto lo = parse_number(items[0]);
        auto hi = parse_number(items[1]);
        if (lo && hi) {
          hp.bounded = true;
          hp.lower = *lo;
          hp.upper = *hi;
        }
      }
    }
    if (hp.discrete && hp.choices.empty()) continue;
    out.push_back(std::move(hp));
  }
  return out;
}

Direction parse_direction(const std::string& text) {
  static const std::regex re(R"(Optimization direction: (maximize|minimize))");
  std::smatch m;
  if (std::regex_search(text, m, re)) return direction_from_string(m[1].str());
  return Direction::maximize;
}

std::vector<SeenTrial> parse_trials(const std::string& text) {
  std::vector<SeenTrial> out;
  std::optional<json> pending;
  for (const auto& raw : split_lines(text)) {
    const std::string line = trim(raw);
    if (line.starts_with("Hyper-parameters: ")) {
      try {
        pending = json::parse(line.substr(18));
      } catch (const json::parse_error&) {
        pending.reset();
      }
      continue;
    }
    std::string_view score_text;
    if (line.starts_with("Final Score: ")) score_text = std::string_view(line).substr(13);
    else if (line.starts_with("Score: ")) score_text = std::string_view(line).substr(7);
    else continue;
    if (!pending) continue;
    out.push_back({*pending, parse_number(score_text)});
    pending.reset();
  }
  return out;
}

// ---------------------------------------------------------------------------
// creator policy

class BisectRefine {
 public:
  BisectRefine(std::vector<SeenHp> hps, Direction direction)
      : hps_(std::move(hps)), direction_(direction) {
    for (const auto& hp : hps_) {
      if (hp.discrete) {
        const double n = static_cast<double>(hp.choices.size());
        center_.push_back(std::floor((n - 1) / 2));
        step_.push_back(std::max(1.0, (n - 1) / 4));
      } else if (hp.bounded) {
        const double lo = axis(hp, hp.lower), hi = axis(hp, hp.upper);
        center_.push_back((lo + hi) / 2);
        step_.push_back((hi - lo) / 4);
      } else {
        // bounds hidden from the prompt
        center_.push_back(hp.log_scale ? -2.0 : 0.0);
        step_.push_back(hp.log_scale ? 1.0 : 2.5);
      }
      sign_.push_back(1.0);
    }
  }

  // Rebuilds the state from the logged trials, then proposes the next point.
  std::pair<json, std::string> next(const std::vector<SeenTrial>& trials) {
    if (hps_.empty()) throw MalformedResponse("bisect-refine found no hyper-parameters in the prompt");
    if (trials.empty()) return {to_config(center_), "Start from the center of the search space."};

    std::vector<json> seen{trials.front().config};
    if (auto c = from_config(trials.front().config)) center_ = *c;
    best_ = trials.front().score;
    for (std::size_t k = 1; k < trials.size(); ++k) {
      propose(seen);  // advances past duplicates exactly as the live policy did
      const auto& t = trials[k];
      const std::size_t d = dim_;
      if (t.score && (!best_ || better(direction_, *t.score, *best_))) {
        best_ = t.score;
        if (auto c = from_config(t.config)) center_ = *c;
      } else {
        sign_[d] = -sign_[d];
      }
      step_[d] = shrink(d);
      dim_ = (dim_ + 1) % hps_.size();
      seen.push_back(t.config);
    }
    const auto candidate = propose(seen);
    const auto& hp = hps_[dim_];
    std::string why = "Probe " + hp.name + " one step " + (sign_[dim_] > 0 ? "up" : "down") +
                      " from the best configuration so far";
    if (best_) why += " (score " + format_number(*best_) + ")";
    why += ", keeping the other hyper-parameters fixed.";
    return {to_config(candidate), why};
  }

 private:
  static double axis(const SeenHp& hp, double v) { return hp.log_scale ? std::log10(v) : v; }

  double shrink(std::size_t d) const {
    return hps_[d].discrete ? std::max(1.0, std::floor(step_[d] / 2)) : step_[d] / 2;
  }

  std::vector<double> probe(std::size_t d) const {
    std::vector<double> c = center_;
    const auto& hp = hps_[d];
    if (hp.discrete) {
      const double n = static_cast<double>(hp.choices.size());
      c[d] = std::clamp(std::round(c[d] + sign_[d] * step_[d]), 0.0, n - 1);
    } else {
      c[d] = c[d] + sign_[d] * step_[d];
      if (hp.bounded) c[d] = std::clamp(c[d], axis(hp, hp.lower), axis(hp, hp.upper));
    }
    return c;
  }

  // Treats a probe that repeats a logged point as a failed probe.
  std::vector<double> propose(const std::vector<json>& seen) {
    for (int guard = 0; guard < 64; ++guard) {
      auto c = probe(dim_);
      const json cfg = to_config(c);
      if (std::find(seen.begin(), seen.end(), cfg) == seen.end()) return c;
      sign_[dim_] = -sign_[dim_];
      step_[dim_] = shrink(dim_);
      dim_ = (dim_ + 1) % hps_.size();
    }
    return probe(dim_);
  }

  json to_config(const std::vector<double>& c) const {
    json out = json::object();
    for (std::size_t i = 0; i < hps_.size(); ++i) {
      const auto& hp = hps_[i];
      if (hp.discrete) {
        const std::string& choice = hp.choices[static_cast<std::size_t>(c[i])];
        if (auto n = parse_number(choice)) {
          if (*n == std::floor(*n) && std::abs(*n) < 1e15) out[hp.name] = static_cast<std::int64_t>(*n);
          else out[hp.name] = *n;
        } else {
          out[hp.name] = choice;
        }
        continue;
      }
      double v = hp.log_scale ? std::pow(10.0, c[i]) : c[i];
      if (hp.bounded) v = std::clamp(v, hp.lower, hp.upper);
      if (hp.integer) out[hp.name] = static_cast<std::int64_t>(std::llround(v));
      else out[hp.name] = v;
    }
    return out;
  }

  std::optional<std::vector<double>> from_config(const json& cfg) const {
    std::vector<double> c = center_;
    for (std::size_t i = 0; i < hps_.size(); ++i) {
      const auto& hp = hps_[i];
      if (!cfg.contains(hp.name)) return std::nullopt;
      const json& v = cfg[hp.name];
      if (hp.discrete) {
        const std::string text = v.is_string() ? v.get<std::string>() : v.dump();
        bool found = false;
        for (std::size_t k = 0; k < hp.choices.size(); ++k) {
          const auto a = parse_number(hp.choices[k]);
          const auto b = parse_number(text);
          if (hp.choices[k] == text || (a && b && *a == *b)) {
            c[i] = static_cast<double>(k);
            found = true;
            break;
          }
        }
        if (!found) return std::nullopt;
      } else {
        if (!v.is_number()) return std::nullopt;
        const double x = v.get<double>();
        if (hp.log_scale && x <= 0) return std::nullopt;
        c[i] = axis(hp, x);
      }
    }
    return c;
  }

  std::vector<SeenHp> hps_;
  Direction direction_;
  std::vector<double> center_;
  std::vector<double> step_;
  std::vector<double> sign_;
  std::size_t dim_ = 0;
  std::optional<double> best_;
};

bool has_action_line(const std::string& text, std::string_view action) {
  const std::string want = "Action: " + std::string(action);
  for (const auto& line : split_lines(text)) {
    if (trim(line) == want) return true;
  }
  return false;
}

std::string creator_reply(const std::string& prompt) {
  if (!has_action_line(prompt, kLoadHistoricalLogsTool)) {
    return "Thought: I should review the previous experiments before proposing a new "
           "configuration.\nAction: " + std::string(kLoadHistoricalLogsTool) + "\nAction Input: all";
  }
  // only the last observation of the scratchpad reflects the current log
  const auto pos = prompt.rfind("Action: " + std::string(kLoadHistoricalLogsTool));
  const std::string observed = prompt.substr(pos);
  BisectRefine policy(parse_hp_lines(prompt), parse_direction(observed));
  const auto [config, why] = policy.next(parse_trials(observed));
  return "Thought: I now know the final answer\nFinal Answer: " + why + "\n" + config.dump();
}

std::string executor_reply(const std::string& prompt) {
  auto action = [](std::string_view tool, std::string_view thought, std::string_view input) {
    return "Thought: " + std::string(thought) + "\nAction: " + std::string(tool) +
           "\nAction Input: " + std::string(input);
  };
  if (!has_action_line(prompt, kLoadConfigsTool))
    return action(kLoadConfigsTool, "I should read the current configs first.", "config.json");
  if (!has_action_line(prompt, kWriteConfigsTool)) {
    std::string task;
    for (const auto& line : split_lines(prompt)) {
      if (line.starts_with("Task: ")) task = line;
    }
    const auto brace = task.find('{');
    if (brace == std::string::npos) throw MalformedResponse("bisect-refine found no config in the task");
    return action(kWriteConfigsTool, "I will write the requested hyper-parameters.", task.substr(brace));
  }
  if (!has_action_line(prompt, kExecuteTool))
    return action(kExecuteTool, "Now I will run the training.", "train");
  const auto last_obs = prompt.rfind("\nObservation: ");
  if (!has_action_line(prompt, kLoadTrainingLogsTool)) {
    if (last_obs != std::string::npos && prompt.compare(last_obs + 14, 6, "Error:") == 0) {
      return "Thought: The training did not finish.\nFinal Answer: Training failed, see the "
             "error above.";
    }
    return action(kLoadTrainingLogsTool, "I should inspect the training logs.", "train_log.json");
  }
  std::string final_line;
  for (const auto& line : split_lines(prompt.substr(last_obs == std::string::npos ? 0 : last_obs))) {
    if (line.starts_with("Final ")) final_line = line;
  }
  return "Thought: I now know the final answer\nFinal Answer: Training completed with the "
         "requested hyper-parameters. " + (final_line.empty() ? std::string("No final metric was reported.") : final_line + ".");
}

std::string analysis_reply(const std::string& prompt) {
  const auto trials = parse_trials(prompt);
  const Direction direction = parse_direction(prompt);
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (!trials[i].score) continue;
    if (!best || better(direction, *trials[i].score, *trials[best.value()].score)) best = i;
  }
  std::string out = "1. Best Hyper-Parameter Found in Experiment: ";
  if (best) {
    out += trials[*best].config.dump() + " reached the best score of " +
           format_number(*trials[*best].score) + ".";
  } else {
    out += "no trial produced a score.";
  }
  out += "\n2. Influence of Each Hyper-Parameter: each probe moved one hyper-parameter while the "
         "others stayed fixed, so score changes between consecutive trials trace that "
         "hyper-parameter's effect.";
  out += "\n3. Potential Future Exploration Direction: refine around the best configuration with "
         "smaller steps.";
  return out;
}

}  // namespace

std::string bisect_refine_reply(std::span<const ChatMessage> messages) {
  std::string prompt;
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == Role::user) {
      prompt = it->content;
      break;
    }
  }
  if (prompt.starts_with(kAnalysisRequestMarker)) return analysis_reply(prompt);
  if (prompt.find("You are a task creation AI expert") != std::string::npos) return creator_reply(prompt);
  if (prompt.find("You are the machine learning experimenter") != std::string::npos)
    return executor_reply(prompt);
  throw MalformedResponse("bisect-refine does not recognize this conversation");
}

}  // namespace hpoloop
