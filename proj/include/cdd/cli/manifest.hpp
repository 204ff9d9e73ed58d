#pragma once

#include <filesystem>
#include <string>

#include "cdd/util/json_io.hpp"

namespace cdd {

inline constexpr const char* kToolVersion = "0.1.0";

// How an output directory was produced. `resolved` holds the fully merged
// configuration, in the same shape a --config file takes, so a run can be
// repeated from the manifest alone.
struct RunManifest {
  std::string command;
  Json resolved = Json::object();
  Json inputs = Json::object();
  std::string output;
  std::string tool_version = kToolVersion;
  std::string created_at;

  Json to_json() const;
  static RunManifest from_json(const Json& j);
};

Json schema_versions();

// Reads the RunManifest of a command output directory or manifest file.
// Campaign and sweep manifests carry it under "run".
RunManifest read_run_manifest(const std::filesystem::path& dir_or_file);

}  // namespace cdd
