#include "hpoloop/values.hpp"

#include <charconv>
#include <cmath>
#include <numbers>

#include "hpoloop/errors.hpp"

namespace hpoloop {

namespace {

std::string render_violations(const std::vector<Violation>& violations) {
  std::string out = "invalid configuration:";
  for (const auto& v : violations) {
    out += "\n  " + v.name;
    if (!v.value.empty()) out += " = " + v.value;
    out += " (" + v.constraint + ")";
  }
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : Error("validation_error", render_violations(violations)),
      violations_(std::move(violations)) {}

bool is_numeric(const HpValue& v) { return !std::holds_alternative<std::string>(v); }

double as_double(const HpValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return std::get<double>(v);
}

bool value_equal(const HpValue& a, const HpValue& b) {
  if (is_numeric(a) && is_numeric(b)) return as_double(a) == as_double(b);
  if (!is_numeric(a) && !is_numeric(b)) return std::get<std::string>(a) == std::get<std::string>(b);
  return false;
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_scientific(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific);
  return std::string(buf, res.ptr);
}

std::string format_value(const HpValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&v)) return format_number(*d);
  return std::get<std::string>(v);
}

json value_to_json(const HpValue& v) {
  return std::visit([](const auto& x) { return json(x); }, v);
}

HpValue value_from_json(const json& j) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw SchemaError("expected a number or string value, got " + j.dump());
}

std::string_view to_string(Direction d) {
  return d == Direction::maximize ? "maximize" : "minimize";
}

Direction direction_from_string(std::string_view s) {
  if (s == "maximize") return Direction::maximize;
  if (s == "minimize") return Direction::minimize;
  throw SchemaError("direction must be \"maximize\" or \"minimize\", got \"" +
                    std::string(s) + "\"");
}

double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform_real(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(rng());
  // rejection sampling keeps the draw exactly uniform
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return lo + static_cast<std::int64_t>(x % span);
}

double standard_normal(Rng& rng) {
  // Box-Muller; the second variate is discarded to keep the stream stateless.
  double u1;
  do {
    u1 = uniform01(rng);
  } while (u1 <= 0.0);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace hpoloop
