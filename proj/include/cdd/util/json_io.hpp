#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace cdd {

using Json = nlohmann::json;

// Throws Usage when the file is missing, Schema when it does not parse.
Json read_json_file(const std::filesystem::path& path);

// Pretty-printed, trailing newline, atomic replace.
void write_json_file(const std::filesystem::path& path, const Json& value);

// One compact JSON value per line. Blank lines are skipped; a truncated
// final line (interrupted write) is ignored.
std::vector<Json> read_jsonl(const std::filesystem::path& path);

}  // namespace cdd
