#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

namespace hpoloop {

using json = nlohmann::json;

// Every run owns one of these; nothing in the library keeps a global source.
using Rng = std::mt19937_64;

// A single hyperparameter value. Integers and doubles compare equal when
// numerically equal, so `32` and `32.0` name the same ordinal choice.
using HpValue = std::variant<std::int64_t, double, std::string>;

bool is_numeric(const HpValue& v);
// Precondition: is_numeric(v).
double as_double(const HpValue& v);
bool value_equal(const HpValue& a, const HpValue& b);
std::string format_value(const HpValue& v);
json value_to_json(const HpValue& v);
// Throws SchemaError for booleans, nulls, arrays and objects.
HpValue value_from_json(const json& j);

// Shortest text that reads back to exactly `v`.
std::string format_number(double v);
std::string format_scientific(double v);

enum class Direction { maximize, minimize };

std::string_view to_string(Direction d);
Direction direction_from_string(std::string_view s);

// True when `candidate` is strictly better than `incumbent`.
inline bool better(Direction d, double candidate, double incumbent) {
  return d == Direction::maximize ? candidate > incumbent : candidate < incumbent;
}

// Portable draws; std distributions differ between standard libraries and the
// determinism contracts of the harness rule them out.
double uniform01(Rng& rng);
double uniform_real(Rng& rng, double lo, double hi);
// Uniform integer on the closed range [lo, hi].
std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi);
double standard_normal(Rng& rng);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace hpoloop
