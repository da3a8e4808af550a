#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hpoloop {

std::string trim(std::string_view s);
// Removes one layer of matching '...' or "..." quotes.
std::string strip_quotes(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
// Full-token decimal or scientific number; leading '+' allowed.
std::optional<double> parse_number(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);
std::string replace_all(std::string s, std::string_view from, std::string_view to);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Throws FileMissing when absent, IoError on read failure.
std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temp file then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// ISO-8601 UTC timestamp with milliseconds.
std::string utc_timestamp_now();

}  // namespace hpoloop
