#include "polprog/io.hpp"

#include <fstream>
#include <sstream>

#include "polprog/error.hpp"

namespace polprog::io {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_new_file(const std::filesystem::path& path, std::string_view contents) {
  if (std::filesystem::exists(path)) {
    throw Error("refusing to overwrite existing file: " + path.string());
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace polprog::io
