#include "cdd/util/json_io.hpp"

#include <fstream>

#include "cdd/error.hpp"
#include "cdd/util/fs.hpp"

namespace cdd {

Json read_json_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::Usage, "file not found: " + path.string());
  }
  try {
    return Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Schema, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& value) {
  atomic_write(path, value.dump(2) + "\n");
}

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Usage, "cannot read file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  std::vector<Json> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(Json::parse(lines[i]));
    } catch (const Json::exception& e) {
      if (i + 1 == lines.size()) break;
      throw Error(ErrorCode::Schema, path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace cdd
