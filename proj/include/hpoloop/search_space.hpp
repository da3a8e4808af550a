#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hpoloop/values.hpp"

namespace hpoloop {

enum class HpKind { categorical, integer, floating, ordinal };

std::string_view to_string(HpKind k);

struct HyperparameterSpec {
  std::string name;
  HpKind kind = HpKind::floating;
  bool log_scale = false;
  // Used by integer and floating kinds.
  double lower = 0.0;
  double upper = 0.0;
  // Used by categorical and ordinal kinds.
  std::vector<HpValue> choices;
  std::string description;

  bool numeric() const { return kind == HpKind::integer || kind == HpKind::floating; }
  bool operator==(const HyperparameterSpec& other) const;
};

// An ordered, validated, immutable list of specs.
class SearchSpace {
 public:
  // Throws SchemaError naming every offending field.
  explicit SearchSpace(std::vector<HyperparameterSpec> specs);

  const std::vector<HyperparameterSpec>& specs() const noexcept { return specs_; }
  std::size_t size() const noexcept { return specs_.size(); }
  const HyperparameterSpec* find(std::string_view name) const;
  std::optional<std::size_t> index_of(std::string_view name) const;

  bool operator==(const SearchSpace& other) const { return specs_ == other.specs_; }

 private:
  std::vector<HyperparameterSpec> specs_;
};

// H_t: one concrete assignment of values, keyed by HP name.
struct HyperparameterConfig {
  std::map<std::string, HpValue> assignments;

  bool operator==(const HyperparameterConfig& other) const;
  const HpValue* get(std::string_view name) const;
};

json config_to_json(const HyperparameterConfig& config);
// Throws SchemaError when `j` is not an object of numbers/strings.
HyperparameterConfig config_from_json(const json& j);
// Compact single-line rendering, e.g. {"lr":0.001,"opt":"adam"}.
std::string config_to_text(const HyperparameterConfig& config);

// Search-space file: {"hyperparameters": [ {name, kind, log_scale, range|choices,
// description}, ... ]}. Unknown keys are rejected.
SearchSpace parse_search_space(const json& document);
SearchSpace parse_search_space(std::string_view text);
SearchSpace load_search_space(const std::string& path);
json serialize_search_space(const SearchSpace& space);

enum class ValidationMode { reject, clamp };

// Returns the (possibly clamped) config or throws ValidationError listing
// every violation. Clamp mode only repairs numeric out-of-range values.
HyperparameterConfig validate_config(const SearchSpace& space,
                                     const HyperparameterConfig& config,
                                     ValidationMode mode = ValidationMode::reject);
bool is_valid(const SearchSpace& space, const HyperparameterConfig& config);

// Draws one value for `spec`. Log-scale numerics are uniform in log10 space;
// integers are rounded to the nearest whole number and clipped.
HpValue sample_value(const HyperparameterSpec& spec, Rng& rng);
HyperparameterConfig sample_uniform(const SearchSpace& space, Rng& rng);

// Arithmetic (or log10) midpoint of numeric ranges; middle element of choice
// lists.
HyperparameterConfig midpoint_config(const SearchSpace& space);

// Converts free text (from an LLM) into a value for `spec`: numbers for numeric
// kinds, the matching choice for categorical/ordinal. Unmatched choices come
// back as strings so validation can report them.
std::optional<HpValue> coerce_value(const HyperparameterSpec& spec, std::string_view text);
std::optional<HpValue> coerce_json_value(const HyperparameterSpec& spec, const json& j);

struct DescribeOptions {
  // The convex probes can hide ranges from the Creator.
  bool show_bounds = true;
};

// One line per HP in declaration order; byte-identical for equal input.
std::string describe_for_prompt(const SearchSpace& space, DescribeOptions options = {});
std::string describe_spec(const HyperparameterSpec& spec, DescribeOptions options = {});

}  // namespace hpoloop
