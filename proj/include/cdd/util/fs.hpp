#pragma once

#include <filesystem>
#include <string>

namespace cdd {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames over the target.
void atomic_write(const std::filesystem::path& path, const std::string& content);

// ISO-8601 UTC timestamp with second precision.
std::string utc_timestamp();

}  // namespace cdd
