#include "hpoloop/trial_runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "hpoloop/errors.hpp"
#include "hpoloop/subprocess.hpp"
#include "hpoloop/text_util.hpp"

namespace hpoloop {

// ---------------------------------------------------------------------------
// training-log contract

json trajectory_to_json(const TrainingTrajectory& t) {
  json metrics = json::object();
  for (const auto& [name, series] : t.metrics) metrics[name] = series;
  return json{{"epochs", t.epochs},
              {"metrics", std::move(metrics)},
              {"final_metric", t.final_metric},
              {"total_time_s", t.total_time_s}};
}

std::vector<std::string> check_training_log(const json& j, const std::string& goal_metric) {
  std::vector<std::string> problems;
  if (!j.is_object()) return {"training log must be a JSON object"};
  for (const auto& [key, _] : j.items()) {
    if (key != "epochs" && key != "metrics" && key != "final_metric" && key != "total_time_s")
      problems.push_back("unknown key '" + key + "'");
  }
  std::size_t n_epochs = 0;
  if (!j.contains("epochs") || !j["epochs"].is_array()) {
    problems.push_back("'epochs' must be an array of integers");
  } else {
    n_epochs = j["epochs"].size();
    if (n_epochs == 0) problems.push_back("'epochs' must not be empty");
    for (const auto& e : j["epochs"]) {
      if (!e.is_number_integer() || e.get<std::int64_t>() < 0) {
        problems.push_back("'epochs' must contain only non-negative integers");
        break;
      }
    }
  }
  if (!j.contains("metrics") || !j["metrics"].is_object()) {
    problems.push_back("'metrics' must be an object of number arrays");
  } else {
    if (j["metrics"].empty()) problems.push_back("'metrics' must hold at least one series");
    for (const auto& [name, series] : j["metrics"].items()) {
      if (!series.is_array()) {
        problems.push_back("metrics." + name + " must be an array");
        continue;
      }
      if (series.size() != n_epochs)
        problems.push_back("metrics." + name + " has " + std::to_string(series.size()) +
                           " values but there are " + std::to_string(n_epochs) + " epochs");
      for (const auto& v : series) {
        if (!v.is_number()) {
          problems.push_back("metrics." + name + " must contain only numbers");
          break;
        }
      }
    }
  }
  if (!j.contains("final_metric") || !j["final_metric"].is_number())
    problems.push_back("'final_metric' must be a number");
  if (!j.contains("total_time_s") || !j["total_time_s"].is_number())
    problems.push_back("'total_time_s' must be a number");
  else if (j["total_time_s"].get<double>() < 0)
    problems.push_back("'total_time_s' must be >= 0");

  if (problems.empty() && !goal_metric.empty() && j["metrics"].contains(goal_metric)) {
    const auto& series = j["metrics"][goal_metric];
    if (!series.empty() && series.back().get<double>() != j["final_metric"].get<double>())
      problems.push_back("'final_metric' differs from the last value of metrics." + goal_metric);
  }
  return problems;
}

TrainingTrajectory trajectory_from_json(const json& j, const std::string& goal_metric) {
  auto problems = check_training_log(j, goal_metric);
  if (!problems.empty()) throw LogParseError("malformed training log: " + join(problems, "; "));
  TrainingTrajectory t;
  t.epochs = j["epochs"].get<std::vector<std::int64_t>>();
  for (const auto& [name, series] : j["metrics"].items())
    t.metrics[name] = series.get<std::vector<double>>();
  t.final_metric = j["final_metric"].get<double>();
  t.total_time_s = j["total_time_s"].get<double>();
  return t;
}

TrainingTrajectory load_training_log(const std::filesystem::path& path,
                                     const std::string& goal_metric) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw LogParseError("training log " + path.string() + " is not valid JSON: " + e.what());
  }
  return trajectory_from_json(j, goal_metric);
}

void write_training_log(const std::filesystem::path& path, const TrainingTrajectory& t) {
  write_file_atomic(path, trajectory_to_json(t).dump() + "\n");
}

// ---------------------------------------------------------------------------
// environment

namespace {

bool inside(const std::filesystem::path& dir, const std::filesystem::path& p) {
  const auto d = std::filesystem::weakly_canonical(dir);
  const auto q = std::filesystem::weakly_canonical(p.is_absolute() ? p : dir / p);
  auto [a, b] = std::mismatch(d.begin(), d.end(), q.begin(), q.end());
  return a == d.end();
}

}  // namespace

void ExecutorEnv::check() const {
  std::vector<std::string> problems;
  if (workdir.empty()) problems.push_back("workdir is empty");
  if (!inside(workdir, config_path)) problems.push_back("config_path is outside workdir");
  if (!inside(workdir, train_log_path)) problems.push_back("train_log_path is outside workdir");
  if (timeout.count() <= 0) problems.push_back("timeout must be positive");
  if (!launcher && train_command.empty())
    problems.push_back("either a train command or a builtin launcher is required");
  if (!problems.empty()) throw SchemaError("invalid executor env: " + join(problems, "; "));
}

ExecutorEnv ExecutorEnv::in_dir(const std::filesystem::path& workdir) {
  ExecutorEnv env;
  env.workdir = workdir;
  env.config_path = workdir / "config.json";
  env.train_log_path = workdir / "train_log.json";
  return env;
}

// ---------------------------------------------------------------------------
// task specs

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::convex2d: return "convex2d";
    case TaskKind::synthetic_trainer: return "synthetic_trainer";
    case TaskKind::toy_classifier: return "toy_classifier";
    case TaskKind::external: return "external";
  }
  return "?";
}

namespace {

TaskKind kind_from_string(const std::string& s) {
  if (s == "convex2d") return TaskKind::convex2d;
  if (s == "synthetic_trainer") return TaskKind::synthetic_trainer;
  if (s == "toy_classifier") return TaskKind::toy_classifier;
  if (s == "external") return TaskKind::external;
  throw SchemaError("task.kind: unknown kind '" + s + "'");
}

double num(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw SchemaError(std::string("task.") + key + " must be a number");
  return j[key].get<double>();
}

std::int64_t whole(const json& j, const char* key, std::int64_t fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer())
    throw SchemaError(std::string("task.") + key + " must be an integer");
  return j[key].get<std::int64_t>();
}

std::pair<double, double> pair_of(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw SchemaError(what + " must be a [number, number] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed) {
  std::vector<std::string> bad;
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) bad.push_back(key);
  }
  if (!bad.empty()) throw SchemaError("task: unknown keys " + join(bad, ", "));
}

}  // namespace

TaskSpec parse_task_spec(const json& j) {
  if (!j.is_object()) throw SchemaError("task must be an object");
  if (!j.contains("kind") || !j["kind"].is_string()) throw SchemaError("task.kind is required");
  TaskSpec t;
  t.kind = kind_from_string(j["kind"].get<std::string>());
  if (j.contains("id")) t.id = j["id"].get<std::string>();
  else t.id = std::string(to_string(t.kind));
  if (j.contains("measure_time")) {
    if (!j["measure_time"].is_boolean()) throw SchemaError("task.measure_time must be a boolean");
    t.measure_time = j["measure_time"].get<bool>();
  }

  switch (t.kind) {
    case TaskKind::convex2d: {
      reject_unknown(j, {"kind", "id", "measure_time", "goal_metric", "direction", "center",
                         "bounds", "names"});
      Convex2dParams p;
      if (j.contains("center")) std::tie(p.center_x, p.center_y) = pair_of(j["center"], "task.center");
      if (j.contains("bounds")) {
        const auto& b = j["bounds"];
        if (!b.is_array() || b.size() != 2) throw SchemaError("task.bounds must hold two ranges");
        std::tie(p.x_lower, p.x_upper) = pair_of(b[0], "task.bounds[0]");
        std::tie(p.y_lower, p.y_upper) = pair_of(b[1], "task.bounds[1]");
      }
      if (j.contains("names")) {
        const auto& n = j["names"];
        if (!n.is_array() || n.size() != 2 || !n[0].is_string() || !n[1].is_string())
          throw SchemaError("task.names must be two strings");
        p.x_name = n[0].get<std::string>();
        p.y_name = n[1].get<std::string>();
      }
      if (!(p.x_lower < p.x_upper && p.y_lower < p.y_upper))
        throw SchemaError("task.bounds: lower must be below upper");
      if (p.center_x < p.x_lower || p.center_x > p.x_upper || p.center_y < p.y_lower ||
          p.center_y > p.y_upper)
        throw SchemaError("task.center lies outside task.bounds");
      t.params = p;
      t.goal_metric = "objective";
      t.direction = Direction::minimize;
      break;
    }
    case TaskKind::synthetic_trainer: {
      reject_unknown(j, {"kind", "id", "measure_time", "goal_metric", "direction", "floor",
                         "ceiling", "rate", "overfit", "noise", "epochs", "terms"});
      SyntheticParams p;
      p.floor = num(j, "floor", p.floor);
      p.ceiling = num(j, "ceiling", p.ceiling);
      p.rate = num(j, "rate", p.rate);
      p.overfit = num(j, "overfit", p.overfit);
      p.noise = num(j, "noise", p.noise);
      p.epochs = static_cast<int>(whole(j, "epochs", p.epochs));
      if (p.noise < 0) throw SchemaError("task.noise must be >= 0");
      if (p.epochs < 2) throw SchemaError("task.epochs must be >= 2");
      if (p.rate <= 0) throw SchemaError("task.rate must be > 0");
      if (p.overfit < 0) throw SchemaError("task.overfit must be >= 0");
      if (j.contains("terms")) {
        for (const auto& term : j["terms"]) {
          SurfaceTerm s;
          if (!term.contains("hp") || !term["hp"].is_string())
            throw SchemaError("task.terms[].hp is required");
          s.hp = term["hp"].get<std::string>();
          for (const auto& [key, _] : term.items()) {
            if (key != "hp" && key != "choice" && key != "target" && key != "width")
              throw SchemaError("task.terms[]." + key + " is not a known field (hp, target, choice, width)");
          }
          if (term.contains("choice")) s.target_choice = term["choice"].get<std::string>();
          s.target = num(term, "target", s.target);
          s.width = num(term, "width", s.width);
          if (s.width <= 0) throw SchemaError("task.terms[].width must be > 0");
          if (s.target < 0 || s.target > 1)
            throw SchemaError("task.terms[].target is a normalized position and must lie in [0, 1]");
          p.terms.push_back(std::move(s));
        }
      }
      t.params = p;
      t.goal_metric = "val_acc";
      t.direction = Direction::maximize;
      break;
    }
    case TaskKind::toy_classifier: {
      reject_unknown(j, {"kind", "id", "measure_time", "goal_metric", "direction",
                         "dataset_seed", "size", "separation", "feature_scale", "learning_rate", "epochs",
                         "l2_weight", "batch_size"});
      ToyClassifierParams p;
      p.dataset_seed = static_cast<std::uint64_t>(whole(j, "dataset_seed", 7));
      p.size = static_cast<int>(whole(j, "size", p.size));
      p.separation = num(j, "separation", p.separation);
      p.feature_scale = num(j, "feature_scale", p.feature_scale);
      p.learning_rate = num(j, "learning_rate", p.learning_rate);
      p.epochs = static_cast<int>(whole(j, "epochs", p.epochs));
      p.l2_weight = num(j, "l2_weight", p.l2_weight);
      p.batch_size = static_cast<int>(whole(j, "batch_size", p.batch_size));
      if (p.size < 20) throw SchemaError("task.size must be >= 20");
      t.params = p;
      t.goal_metric = "val_acc";
      t.direction = Direction::maximize;
      break;
    }
    case TaskKind::external: {
      reject_unknown(j, {"kind", "id", "measure_time", "goal_metric", "direction", "command"});
      ExternalParams p;
      if (!j.contains("command") || !j["command"].is_string())
        throw SchemaError("task.command is required for external tasks");
      p.command = j["command"].get<std::string>();
      if (p.command.find("{config}") == std::string::npos ||
          p.command.find("{log}") == std::string::npos)
        throw SchemaError("task.command must contain both {config} and {log}");
      if (!j.contains("goal_metric") || !j.contains("direction"))
        throw SchemaError("external tasks need goal_metric and direction");
      t.params = p;
      break;
    }
  }
  if (j.contains("goal_metric")) t.goal_metric = j["goal_metric"].get<std::string>();
  if (j.contains("direction")) {
    try {
      t.direction = direction_from_string(j["direction"].get<std::string>());
    } catch (const Error& e) {
      throw SchemaError(std::string("task.direction: ") + e.what());
    }
  }
  return t;
}

json task_spec_to_json(const TaskSpec& t) {
  json j{{"kind", std::string(to_string(t.kind))},
         {"id", t.id},
         {"goal_metric", t.goal_metric},
         {"direction", std::string(to_string(t.direction))},
         {"measure_time", t.measure_time}};
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, Convex2dParams>) {
          j["center"] = {p.center_x, p.center_y};
          j["bounds"] = {{p.x_lower, p.x_upper}, {p.y_lower, p.y_upper}};
          j["names"] = {p.x_name, p.y_name};
        } else if constexpr (std::is_same_v<P, SyntheticParams>) {
          j["floor"] = p.floor;
          j["ceiling"] = p.ceiling;
          j["rate"] = p.rate;
          j["overfit"] = p.overfit;
          j["noise"] = p.noise;
          j["epochs"] = p.epochs;
          json terms = json::array();
          for (const auto& s : p.terms) {
            json term{{"hp", s.hp}, {"width", s.width}};
            if (s.target_choice.empty()) term["target"] = s.target;
            else term["choice"] = s.target_choice;
            terms.push_back(std::move(term));
          }
          j["terms"] = std::move(terms);
        } else if constexpr (std::is_same_v<P, ToyClassifierParams>) {
          j["dataset_seed"] = p.dataset_seed;
          j["size"] = p.size;
          j["separation"] = p.separation;
          j["feature_scale"] = p.feature_scale;
          j["learning_rate"] = p.learning_rate;
          j["epochs"] = p.epochs;
          j["l2_weight"] = p.l2_weight;
          j["batch_size"] = p.batch_size;
        } else {
          j["command"] = p.command;
        }
      },
      t.params);
  return j;
}

SearchSpace convex2d_space(const Convex2dParams& p) {
  HyperparameterSpec x;
  x.name = p.x_name;
  x.kind = HpKind::floating;
  x.lower = p.x_lower;
  x.upper = p.x_upper;
  HyperparameterSpec y = x;
  y.name = p.y_name;
  y.lower = p.y_lower;
  y.upper = p.y_upper;
  return SearchSpace({x, y});
}

// ---------------------------------------------------------------------------
// convex probe

double eval_convex2d(const Convex2dParams& p, double x, double y) {
  if (!(x >= p.x_lower && x <= p.x_upper && y >= p.y_lower && y <= p.y_upper)) {
    throw OutOfBounds("point (" + format_number(x) + ", " + format_number(y) +
                      ") lies outside the task bounds");
  }
  const double dx = x - p.center_x;
  const double dy = y - p.center_y;
  return dx * dx + dy * dy;
}

namespace {

double numeric_hp(const HyperparameterConfig& config, const std::string& name) {
  const HpValue* v = config.get(name);
  if (!v) throw SchemaError("config has no value for '" + name + "'");
  if (!is_numeric(*v)) throw SchemaError("config value for '" + name + "' is not a number");
  return as_double(*v);
}

double numeric_hp_or(const HyperparameterConfig& config, const std::string& name,
                     double fallback) {
  return config.get(name) ? numeric_hp(config, name) : fallback;
}

}  // namespace

TrainingTrajectory run_convex2d(const Convex2dParams& p, const HyperparameterConfig& config) {
  const double f = eval_convex2d(p, numeric_hp(config, p.x_name), numeric_hp(config, p.y_name));
  TrainingTrajectory t;
  t.epochs = {0};
  t.metrics["objective"] = {f};
  t.final_metric = f;
  return t;
}

// ---------------------------------------------------------------------------
// synthetic learning curves

namespace {

// Position of a value in [0, 1] along its spec (log10 axis for log scale,
// index axis for ordinals).
double normalized_position(const HyperparameterSpec& spec, const HpValue& v) {
  if (spec.numeric()) {
    double x = as_double(v), lo = spec.lower, hi = spec.upper;
    if (spec.log_scale) {
      x = std::log10(x);
      lo = std::log10(lo);
      hi = std::log10(hi);
    }
    return std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
  }
  const auto n = spec.choices.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (value_equal(spec.choices[i], v)) return n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
  }
  throw SchemaError("value " + format_value(v) + " is not a choice of '" + spec.name + "'");
}

}  // namespace

TrainingTrajectory run_synthetic_trainer(const SyntheticParams& p, const SearchSpace& space,
                                         const HyperparameterConfig& config, std::uint64_t seed) {
  if (p.epochs < 2) throw SchemaError("synthetic trainer needs at least 2 epochs");
  double distance2 = 0.0;
  for (const auto& term : p.terms) {
    const HyperparameterSpec* spec = space.find(term.hp);
    if (!spec) throw SchemaError("surface term names unknown HP '" + term.hp + "'");
    const HpValue* v = config.get(term.hp);
    if (!v) throw SchemaError("config has no value for '" + term.hp + "'");
    double d;
    if (!term.target_choice.empty()) {
      d = value_equal(*v, HpValue{term.target_choice}) ? 0.0 : 1.0;
    } else {
      d = normalized_position(*spec, *v) - term.target;
    }
    distance2 += (d / term.width) * (d / term.width);
  }
  const double quality = std::exp(-distance2);
  const double asymptote = p.floor + (p.ceiling - p.floor) * quality;
  const double k = p.rate * (0.5 + 0.5 * quality);

  Rng rng(seed);
  TrainingTrajectory t;
  auto& train_acc = t.metrics["train_acc"];
  auto& val_acc = t.metrics["val_acc"];
  auto& train_loss = t.metrics["train_loss"];
  auto& val_loss = t.metrics["val_loss"];
  for (int e = 0; e < p.epochs; ++e) {
    const double s = e + 1.0;
    const double base = asymptote * (1.0 - std::exp(-k * s));
    double tr = base + p.overfit * s;
    double va = base - p.overfit * s;
    if (p.noise > 0) {
      tr += p.noise * standard_normal(rng);
      va += p.noise * standard_normal(rng);
    }
    t.epochs.push_back(e);
    train_acc.push_back(tr);
    val_acc.push_back(va);
    train_loss.push_back(1.0 - tr);
    val_loss.push_back(1.0 - va);
  }
  t.final_metric = val_acc.back();
  return t;
}

// ---------------------------------------------------------------------------
// toy classifier

namespace {

struct Sample {
  double x0, x1;
  int label;
};

std::vector<Sample> make_blobs(std::uint64_t seed, int size, double separation, double scale) {
  Rng rng(seed);
  const double c = separation / std::sqrt(2.0);
  std::vector<Sample> data;
  data.reserve(size);
  for (int i = 0; i < size; ++i) {
    const int label = i % 2;
    const double sign = label ? 1.0 : -1.0;
    const double a = standard_normal(rng);
    const double b = standard_normal(rng);
    data.push_back({scale * (sign * c + a), sign * c + b, label});
  }
  return data;
}

// Mean logistic loss and accuracy; log1p form stays finite for large margins.
std::pair<double, double> evaluate(const std::vector<Sample>& data, std::size_t begin,
                                   std::size_t end, double w0, double w1, double b) {
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = begin; i < end; ++i) {
    const auto& s = data[i];
    const double z = w0 * s.x0 + w1 * s.x1 + b;
    const double m = s.label ? z : -z;
    loss += m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
    if ((z > 0) == (s.label == 1)) ++correct;
  }
  const double n = static_cast<double>(end - begin);
  return {loss / n, static_cast<double>(correct) / n};
}

}  // namespace

TrainingTrajectory run_toy_classifier(const ToyClassifierParams& p,
                                      const HyperparameterConfig& config) {
  if (p.size < 20) throw SchemaError("toy classifier needs size >= 20");
  const double lr = numeric_hp_or(config, "learning_rate", p.learning_rate);
  const double l2 = numeric_hp_or(config, "l2_weight", p.l2_weight);
  const int epochs = static_cast<int>(numeric_hp_or(config, "epochs", p.epochs));
  const std::size_t n_train = static_cast<std::size_t>(p.size) * 4 / 5;
  int batch = static_cast<int>(numeric_hp_or(config, "batch_size", p.batch_size));
  if (batch <= 0 || static_cast<std::size_t>(batch) > n_train) batch = static_cast<int>(n_train);
  if (epochs < 1) throw SchemaError("toy classifier needs epochs >= 1");
  if (!(lr > 0)) throw SchemaError("toy classifier needs learning_rate > 0");

  const auto data = make_blobs(p.dataset_seed, p.size, p.separation, p.feature_scale);
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(splitmix64(p.dataset_seed));

  double w0 = 0.0, w1 = 0.0, b = 0.0;
  const double initial_loss = evaluate(data, 0, n_train, w0, w1, b).first;
  constexpr double kDivergenceFactor = 100.0;

  TrainingTrajectory t;
  auto& train_loss = t.metrics["train_loss"];
  auto& train_acc = t.metrics["train_acc"];
  auto& val_loss = t.metrics["val_loss"];
  auto& val_acc = t.metrics["val_acc"];
  for (int e = 0; e < epochs; ++e) {
    // Fisher-Yates with the portable integer draw
    for (std::size_t i = n_train - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(shuffle_rng, 0, static_cast<std::int64_t>(i)));
      std::swap(order[i], order[j]);
    }
    for (std::size_t start = 0; start < n_train; start += batch) {
      const std::size_t stop = std::min(n_train, start + batch);
      double g0 = 0.0, g1 = 0.0, gb = 0.0;
      for (std::size_t k = start; k < stop; ++k) {
        const auto& s = data[order[k]];
        const double z = w0 * s.x0 + w1 * s.x1 + b;
        const double pr = 1.0 / (1.0 + std::exp(-z));
        const double r = pr - s.label;
        g0 += r * s.x0;
        g1 += r * s.x1;
        gb += r;
      }
      const double m = static_cast<double>(stop - start);
      w0 -= lr * (g0 / m + l2 * w0);
      w1 -= lr * (g1 / m + l2 * w1);
      b -= lr * (gb / m);
    }
    const auto [tl, ta] = evaluate(data, 0, n_train, w0, w1, b);
    const auto [vl, va] = evaluate(data, n_train, n, w0, w1, b);
    if (!std::isfinite(tl) || !std::isfinite(vl) || tl > kDivergenceFactor * initial_loss) {
      throw DivergenceDetected("training loss diverged at epoch " + std::to_string(e) +
                               " (loss " + format_number(tl) + ")");
    }
    t.epochs.push_back(e);
    train_loss.push_back(tl);
    train_acc.push_back(ta);
    val_loss.push_back(vl);
    val_acc.push_back(va);
  }
  t.final_metric = val_acc.back();
  return t;
}

// ---------------------------------------------------------------------------
// dispatch

namespace {

TrainingTrajectory compute_builtin(const TaskSpec& task, const SearchSpace& space,
                                   const HyperparameterConfig& config, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  TrainingTrajectory t;
  switch (task.kind) {
    case TaskKind::convex2d:
      t = run_convex2d(std::get<Convex2dParams>(task.params), config);
      break;
    case TaskKind::synthetic_trainer:
      t = run_synthetic_trainer(std::get<SyntheticParams>(task.params), space, config, seed);
      break;
    case TaskKind::toy_classifier:
      t = run_toy_classifier(std::get<ToyClassifierParams>(task.params), config);
      break;
    case TaskKind::external:
      throw SchemaError("external tasks have no builtin trainer");
  }
  if (task.measure_time) {
    t.total_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return t;
}

}  // namespace

std::function<void(const ExecutorEnv&)> builtin_launcher(const TaskSpec& task,
                                                         const SearchSpace& space,
                                                         std::uint64_t seed) {
  return [task, space, seed](const ExecutorEnv& env) {
    json j;
    try {
      j = json::parse(read_file(env.config_path));
    } catch (const json::parse_error& e) {
      throw SchemaError("config file is not valid JSON: " + std::string(e.what()));
    }
    write_training_log(env.train_log_path, compute_builtin(task, space, config_from_json(j), seed));
  };
}

TrainingTrajectory run_task(const TaskSpec& task, const SearchSpace& space,
                            const HyperparameterConfig& config, const ExecutorEnv& env,
                            std::uint64_t seed) {
  std::filesystem::create_directories(env.workdir);
  if (task.kind != TaskKind::external) {
    write_training_log(env.train_log_path, compute_builtin(task, space, config, seed));
    return load_training_log(env.train_log_path, task.goal_metric);
  }
  ExecutorEnv ext = env;
  ext.launcher = nullptr;
  ext.train_command = std::get<ExternalParams>(task.params).command;
  write_file_atomic(ext.config_path, config_to_json(config).dump() + "\n");
  std::filesystem::remove(ext.train_log_path);
  launch_training(ext);
  return load_training_log(ext.train_log_path, task.goal_metric);
}

std::string launch_training(const ExecutorEnv& env) {
  if (env.launcher) {
    env.launcher(env);
    return "";
  }
  std::string command = replace_all(env.train_command, "{config}", shell_quote(env.config_path.string()));
  command = replace_all(command, "{log}", shell_quote(env.train_log_path.string()));
  const CommandOutcome out = run_command(command, env.workdir, env.timeout);
  if (out.timed_out) {
    throw TimeoutError("training command exceeded " + std::to_string(env.timeout.count()) +
                       " ms and was killed");
  }
  if (out.exit_code != 0) throw NonZeroExit(out.exit_code, out.output_tail);
  return out.output_tail;
}

}  // namespace hpoloop
