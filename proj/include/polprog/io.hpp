#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace polprog::io {

/// Reads a whole file; throws ValidationError naming the path on failure.
std::string read_file(const std::filesystem::path& path);

/// Writes a new file; refuses to overwrite an existing one.
void write_new_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace polprog::io
