#include "cdd/cli/manifest.hpp"

#include "cdd/campaign/campaign.hpp"
#include "cdd/decoder/decoder.hpp"
#include "cdd/error.hpp"

namespace cdd {

Json schema_versions() {
  return Json{{"record", GenerationRecord::kSchemaVersion}, {"campaign", kCampaignSchemaVersion}, {"manifest", 1}};
}

Json RunManifest::to_json() const {
  return Json{{"command", command},
              {"resolved", resolved},
              {"inputs", inputs},
              {"output", output},
              {"tool_version", tool_version},
              {"schema_versions", schema_versions()},
              {"created_at", created_at}};
}

RunManifest RunManifest::from_json(const Json& j) {
  try {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.resolved = j.at("resolved");
    m.inputs = j.value("inputs", Json::object());
    m.output = j.value("output", "");
    m.tool_version = j.value("tool_version", "");
    m.created_at = j.value("created_at", "");
    return m;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("run manifest: ") + e.what());
  }
}

RunManifest read_run_manifest(const std::filesystem::path& dir_or_file) {
  const auto path = std::filesystem::is_directory(dir_or_file) ? dir_or_file / kManifestFile : dir_or_file;
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::Usage, "manifest not found: " + path.string());
  const Json j = read_json_file(path);
  if (j.contains("run") && j["run"].contains("command")) return RunManifest::from_json(j["run"]);
  if (j.contains("command")) return RunManifest::from_json(j);
  throw Error(ErrorCode::Usage, path.string() + " carries no run manifest");
}

}  // namespace cdd
