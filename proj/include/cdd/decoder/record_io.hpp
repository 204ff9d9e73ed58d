#pragma once

#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include "cdd/decoder/decoder.hpp"

namespace cdd {

// Appends one record per line and flushes after each, so an interrupted run
// loses at most the line being written.
class RecordWriter {
 public:
  explicit RecordWriter(const std::filesystem::path& path);
  void append(const GenerationRecord& record);

 private:
  std::ofstream out_;
};

// Atomically replaces `path` with the records, one per line.
void write_records(const std::filesystem::path& path, std::span<const GenerationRecord> records);

// Throws Schema on a record with an unknown schema_version.
std::vector<GenerationRecord> read_records(const std::filesystem::path& path);

}  // namespace cdd
