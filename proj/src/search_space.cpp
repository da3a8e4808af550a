#include "hpoloop/search_space.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "hpoloop/errors.hpp"
#include "hpoloop/text_util.hpp"

namespace hpoloop {

std::string_view to_string(HpKind k) {
  switch (k) {
    case HpKind::categorical: return "categorical";
    case HpKind::integer: return "integer";
    case HpKind::floating: return "float";
    case HpKind::ordinal: return "ordinal";
  }
  return "?";
}

namespace {

std::optional<HpKind> kind_from_string(std::string_view s) {
  if (s == "categorical") return HpKind::categorical;
  if (s == "integer") return HpKind::integer;
  if (s == "float") return HpKind::floating;
  if (s == "ordinal") return HpKind::ordinal;
  return std::nullopt;
}

bool is_whole(double v) { return std::isfinite(v) && std::floor(v) == v; }

bool choices_equal(const std::vector<HpValue>& a, const std::vector<HpValue>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].index() != b[i].index() || !value_equal(a[i], b[i])) return false;
  }
  return true;
}

// Collects every problem with one spec; an empty result means valid.
std::vector<std::string> spec_problems(const HyperparameterSpec& s) {
  std::vector<std::string> out;
  if (s.name.empty()) out.push_back("name: must be non-empty");
  if (s.numeric()) {
    if (!std::isfinite(s.lower) || !std::isfinite(s.upper)) {
      out.push_back("range: bounds must be finite");
    } else if (!(s.lower < s.upper)) {
      out.push_back("range: lower bound must be below upper bound");
    }
    if (s.kind == HpKind::integer && (!is_whole(s.lower) || !is_whole(s.upper))) {
      out.push_back("range: integer bounds must be whole numbers");
    }
    if (s.log_scale && !(s.lower > 0.0)) {
      out.push_back("log_scale: requires a strictly positive lower bound");
    }
  } else {
    if (s.log_scale) out.push_back("log_scale: only allowed for integer or float kinds");
    if (s.choices.empty()) out.push_back("choices: must be non-empty");
    for (std::size_t i = 0; i < s.choices.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (value_equal(s.choices[i], s.choices[j])) {
          out.push_back("choices: duplicate value " + format_value(s.choices[i]));
        }
      }
    }
  }
  return out;
}

std::string range_text(const HyperparameterSpec& s) {
  auto fmt = [&](double v) {
    if (s.log_scale) return format_scientific(v);
    return format_number(v);
  };
  return "[" + fmt(s.lower) + ", " + fmt(s.upper) + "]";
}

std::string choices_text(const HyperparameterSpec& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.choices.size(); ++i) {
    if (i) out += ", ";
    out += format_value(s.choices[i]);
  }
  return out + "]";
}

std::string constraint_text(const HyperparameterSpec& s) {
  if (s.numeric()) {
    return std::string(s.kind == HpKind::integer ? "whole number in " : "number in ") +
           range_text(s);
  }
  return "one of " + choices_text(s);
}

}  // namespace

bool HyperparameterSpec::operator==(const HyperparameterSpec& o) const {
  if (name != o.name || kind != o.kind || log_scale != o.log_scale ||
      description != o.description) {
    return false;
  }
  if (numeric()) return lower == o.lower && upper == o.upper;
  return choices_equal(choices, o.choices);
}

SearchSpace::SearchSpace(std::vector<HyperparameterSpec> specs) : specs_(std::move(specs)) {
  std::vector<std::string> problems;
  if (specs_.empty()) problems.push_back("hyperparameters: list must be non-empty");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const std::string prefix = "hyperparameters[" + std::to_string(i) + "] (" +
                               specs_[i].name + ")";
    for (auto& p : spec_problems(specs_[i])) problems.push_back(prefix + "." + p);
    if (!specs_[i].name.empty() && !seen.insert(specs_[i].name).second) {
      problems.push_back(prefix + ".name: duplicate name");
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid search space:";
    for (auto& p : problems) msg += "\n  " + p;
    throw SchemaError(msg);
  }
}

const HyperparameterSpec* SearchSpace::find(std::string_view name) const {
  for (const auto& s : specs_) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

std::optional<std::size_t> SearchSpace::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].name == name) return i;
  }
  return std::nullopt;
}

bool HyperparameterConfig::operator==(const HyperparameterConfig& other) const {
  if (assignments.size() != other.assignments.size()) return false;
  auto it = other.assignments.begin();
  for (const auto& [name, value] : assignments) {
    if (it->first != name || !value_equal(value, it->second)) return false;
    ++it;
  }
  return true;
}

const HpValue* HyperparameterConfig::get(std::string_view name) const {
  auto it = assignments.find(std::string(name));
  return it == assignments.end() ? nullptr : &it->second;
}

json config_to_json(const HyperparameterConfig& config) {
  json j = json::object();
  for (const auto& [name, value] : config.assignments) j[name] = value_to_json(value);
  return j;
}

HyperparameterConfig config_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("config must be a JSON object");
  HyperparameterConfig c;
  for (const auto& [name, value] : j.items()) {
    try {
      c.assignments.emplace(name, value_from_json(value));
    } catch (const SchemaError& e) {
      throw SchemaError(name + ": " + e.what());
    }
  }
  return c;
}

std::string config_to_text(const HyperparameterConfig& config) {
  return config_to_json(config).dump();
}

SearchSpace parse_search_space(const json& document) {
  std::vector<std::string> problems;
  if (!document.is_object()) throw SchemaError("search space document must be a JSON object");
  for (const auto& [key, _] : document.items()) {
    if (key != "hyperparameters") problems.push_back(key + ": unknown key");
  }
  auto hp = document.find("hyperparameters");
  if (hp == document.end() || !hp->is_array()) {
    problems.push_back("hyperparameters: required array");
  }
  std::vector<HyperparameterSpec> specs;
  std::set<std::string> seen;
  if (hp != document.end() && hp->is_array()) {
    std::size_t index = 0;
    for (const auto& item : *hp) {
      const std::string at = "hyperparameters[" + std::to_string(index++) + "]";
      if (!item.is_object()) {
        problems.push_back(at + ": must be an object");
        continue;
      }
      HyperparameterSpec spec;
      std::string label = at;
      if (auto n = item.find("name"); n != item.end() && n->is_string()) {
        spec.name = n->get<std::string>();
        label += " (" + spec.name + ")";
        if (!seen.insert(spec.name).second) problems.push_back(label + ".name: duplicate name");
      } else {
        problems.push_back(at + ".name: required string");
      }
      for (const auto& [key, _] : item.items()) {
        static const std::set<std::string> allowed{"name", "kind", "log_scale", "range",
                                                   "choices", "description"};
        if (!allowed.contains(key)) problems.push_back(label + "." + key + ": unknown key");
      }
      std::optional<HpKind> kind;
      if (auto k = item.find("kind"); k != item.end() && k->is_string()) {
        kind = kind_from_string(k->get<std::string>());
        if (!kind) problems.push_back(label + ".kind: unknown kind \"" + k->get<std::string>() + "\"");
      } else {
        problems.push_back(label + ".kind: required string");
      }
      if (auto l = item.find("log_scale"); l != item.end()) {
        if (l->is_boolean()) spec.log_scale = l->get<bool>();
        else problems.push_back(label + ".log_scale: must be a boolean");
      }
      if (auto d = item.find("description"); d != item.end()) {
        if (d->is_string()) spec.description = d->get<std::string>();
        else problems.push_back(label + ".description: must be a string");
      }
      if (!kind) continue;
      spec.kind = *kind;
      auto range = item.find("range");
      auto choices = item.find("choices");
      if (spec.numeric()) {
        if (choices != item.end()) problems.push_back(label + ".choices: not allowed for numeric kinds");
        if (range == item.end()) {
          problems.push_back(label + ".range: missing range");
          continue;
        }
        if (!range->is_array() || range->size() != 2 || !(*range)[0].is_number() ||
            !(*range)[1].is_number()) {
          problems.push_back(label + ".range: must be [lower, upper]");
          continue;
        }
        spec.lower = (*range)[0].get<double>();
        spec.upper = (*range)[1].get<double>();
      } else {
        if (range != item.end()) problems.push_back(label + ".range: not allowed for choice kinds");
        if (choices == item.end() || !choices->is_array()) {
          problems.push_back(label + ".choices: missing choices");
          continue;
        }
        bool ok = true;
        for (const auto& c : *choices) {
          if (c.is_number() || c.is_string()) {
            spec.choices.push_back(value_from_json(c));
          } else {
            problems.push_back(label + ".choices: values must be numbers or strings");
            ok = false;
            break;
          }
        }
        if (!ok) continue;
      }
      for (auto& p : spec_problems(spec)) problems.push_back(label + "." + p);
      specs.push_back(std::move(spec));
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid search space:";
    for (auto& p : problems) msg += "\n  " + p;
    throw SchemaError(msg);
  }
  return SearchSpace(std::move(specs));
}

SearchSpace parse_search_space(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("search space is not valid JSON: ") + e.what(), e.byte);
  }
  return parse_search_space(doc);
}

SearchSpace load_search_space(const std::string& path) {
  const std::string text = read_file(path);
  return parse_search_space(std::string_view(text));
}

json serialize_search_space(const SearchSpace& space) {
  json list = json::array();
  for (const auto& s : space.specs()) {
    json item;
    item["name"] = s.name;
    item["kind"] = std::string(to_string(s.kind));
    item["log_scale"] = s.log_scale;
    if (s.numeric()) {
      if (s.kind == HpKind::integer) {
        item["range"] = {static_cast<std::int64_t>(s.lower), static_cast<std::int64_t>(s.upper)};
      } else {
        item["range"] = {s.lower, s.upper};
      }
    } else {
      json cs = json::array();
      for (const auto& c : s.choices) cs.push_back(value_to_json(c));
      item["choices"] = cs;
    }
    item["description"] = s.description;
    list.push_back(std::move(item));
  }
  return json{{"hyperparameters", list}};
}

HyperparameterConfig validate_config(const SearchSpace& space,
                                     const HyperparameterConfig& config,
                                     ValidationMode mode) {
  std::vector<Violation> violations;
  HyperparameterConfig out = config;
  for (const auto& spec : space.specs()) {
    const HpValue* value = config.get(spec.name);
    if (!value) {
      violations.push_back({spec.name, "", "required; " + constraint_text(spec)});
      continue;
    }
    if (spec.numeric()) {
      if (!is_numeric(*value) || !std::isfinite(as_double(*value))) {
        violations.push_back({spec.name, format_value(*value), constraint_text(spec)});
        continue;
      }
      const double x = as_double(*value);
      if (spec.kind == HpKind::integer && !is_whole(x)) {
        violations.push_back({spec.name, format_value(*value), constraint_text(spec)});
        continue;
      }
      double kept = x;
      if (x < spec.lower || x > spec.upper) {
        if (mode == ValidationMode::clamp) {
          kept = std::clamp(x, spec.lower, spec.upper);
        } else {
          violations.push_back({spec.name, format_value(*value), constraint_text(spec)});
          continue;
        }
      }
      // integers stay int64 and floats become double whatever the input type was
      out.assignments[spec.name] = spec.kind == HpKind::integer ? HpValue(static_cast<std::int64_t>(std::llround(kept)))
                                                                : HpValue(kept);
    } else {
      bool member = std::any_of(spec.choices.begin(), spec.choices.end(),
                                [&](const HpValue& c) { return value_equal(c, *value); });
      if (!member) violations.push_back({spec.name, format_value(*value), constraint_text(spec)});
    }
  }
  for (const auto& [name, value] : config.assignments) {
    if (!space.find(name)) violations.push_back({name, format_value(value), "not in search space"});
  }
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return out;
}

bool is_valid(const SearchSpace& space, const HyperparameterConfig& config) {
  try {
    validate_config(space, config, ValidationMode::reject);
    return true;
  } catch (const ValidationError&) {
    return false;
  }
}

HpValue sample_value(const HyperparameterSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case HpKind::categorical:
    case HpKind::ordinal: {
      const auto i = uniform_int(rng, 0, static_cast<std::int64_t>(spec.choices.size()) - 1);
      return spec.choices[static_cast<std::size_t>(i)];
    }
    case HpKind::floating: {
      if (spec.log_scale) {
        const double e = uniform_real(rng, std::log10(spec.lower), std::log10(spec.upper));
        return std::clamp(std::pow(10.0, e), spec.lower, spec.upper);
      }
      return uniform_real(rng, spec.lower, spec.upper);
    }
    case HpKind::integer: {
      const auto lo = static_cast<std::int64_t>(spec.lower);
      const auto hi = static_cast<std::int64_t>(spec.upper);
      if (spec.log_scale) {
        const double e = uniform_real(rng, std::log10(spec.lower), std::log10(spec.upper));
        const auto r = static_cast<std::int64_t>(std::llround(std::pow(10.0, e)));
        return std::clamp(r, lo, hi);
      }
      return uniform_int(rng, lo, hi);
    }
  }
  return 0.0;
}

HyperparameterConfig sample_uniform(const SearchSpace& space, Rng& rng) {
  HyperparameterConfig c;
  for (const auto& spec : space.specs()) c.assignments[spec.name] = sample_value(spec, rng);
  return c;
}

HyperparameterConfig midpoint_config(const SearchSpace& space) {
  HyperparameterConfig c;
  for (const auto& spec : space.specs()) {
    if (spec.numeric()) {
      double mid = spec.log_scale
                       ? std::pow(10.0, 0.5 * (std::log10(spec.lower) + std::log10(spec.upper)))
                       : 0.5 * (spec.lower + spec.upper);
      mid = std::clamp(mid, spec.lower, spec.upper);
      if (spec.kind == HpKind::integer) {
        c.assignments[spec.name] = static_cast<std::int64_t>(std::llround(mid));
      } else {
        c.assignments[spec.name] = mid;
      }
    } else {
      c.assignments[spec.name] = spec.choices[(spec.choices.size() - 1) / 2];
    }
  }
  return c;
}

std::optional<HpValue> coerce_value(const HyperparameterSpec& spec, std::string_view text) {
  std::string t = strip_quotes(trim(text));
  if (t.empty()) return std::nullopt;
  auto number = parse_number(t);
  if (spec.numeric()) {
    if (!number) return HpValue(t);
    if (spec.kind == HpKind::integer && is_whole(*number) && std::abs(*number) < 9.0e15) {
      return HpValue(static_cast<std::int64_t>(*number));
    }
    return HpValue(*number);
  }
  for (const auto& c : spec.choices) {
    if (!is_numeric(c) && std::get<std::string>(c) == t) return c;
  }
  for (const auto& c : spec.choices) {
    if (is_numeric(c) && number && as_double(c) == *number) return c;
  }
  for (const auto& c : spec.choices) {
    if (!is_numeric(c) && iequals(std::get<std::string>(c), t)) return c;
  }
  if (number) return HpValue(*number);
  return HpValue(t);
}

std::optional<HpValue> coerce_json_value(const HyperparameterSpec& spec, const json& j) {
  if (j.is_string()) return coerce_value(spec, j.get<std::string>());
  if (j.is_number()) {
    const double x = j.get<double>();
    if (spec.numeric()) {
      if (spec.kind == HpKind::integer && is_whole(x) && std::abs(x) < 9.0e15) {
        return HpValue(static_cast<std::int64_t>(x));
      }
      return j.is_number_integer() ? HpValue(j.get<std::int64_t>()) : HpValue(x);
    }
    for (const auto& c : spec.choices) {
      if (is_numeric(c) && as_double(c) == x) return c;
    }
    return HpValue(x);
  }
  return std::nullopt;
}

std::string describe_spec(const HyperparameterSpec& spec, DescribeOptions options) {
  std::string line = "- " + spec.name + " (" + std::string(to_string(spec.kind));
  if (spec.log_scale) line += ", log scale";
  line += ")";
  if (spec.numeric()) {
    if (options.show_bounds) line += ": range " + range_text(spec);
  } else {
    line += ": choices " + choices_text(spec);
  }
  if (!spec.description.empty()) line += ". " + spec.description;
  return line;
}

std::string describe_for_prompt(const SearchSpace& space, DescribeOptions options) {
  std::string out;
  for (const auto& spec : space.specs()) {
    if (!out.empty()) out += "\n";
    out += describe_spec(spec, options);
  }
  return out;
}

}  // namespace hpoloop
