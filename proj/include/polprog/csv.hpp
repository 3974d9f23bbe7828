#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace polprog::csv {

/// One parsed record with the 1-based line it started on.
struct Row {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// Parses RFC 4180 style CSV. Lines starting with '#' outside quotes are
/// skipped, as are blank lines. Throws ValidationError on an unterminated
/// quoted field.
std::vector<Row> parse(std::string_view text);

std::vector<Row> read_file(const std::filesystem::path& path);

/// Quotes a field if it contains a comma, quote or newline.
std::string escape(std::string_view field);

std::string join(const std::vector<std::string>& fields);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

/// Parses a full-string decimal; returns false on trailing garbage.
bool parse_double(std::string_view text, double& out);

}  // namespace polprog::csv
