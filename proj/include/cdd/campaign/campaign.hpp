#pragma once

// Vague-prefill campaigns: every prefill x trial decoded once, persisted as
// line-delimited records plus a manifest.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cdd/decoder/decoder.hpp"
#include "cdd/provider/provider.hpp"
#include "cdd/util/json_io.hpp"

namespace cdd {

inline constexpr int kCampaignSchemaVersion = 1;
inline constexpr const char* kRecordsFile = "records.jsonl";
inline constexpr const char* kManifestFile = "manifest.json";

const std::vector<std::string>& default_prefills();

struct CampaignConfig {
  std::vector<std::string> prefills = default_prefills();
  std::size_t n_trials = 10;
  DecodeConfig decode;

  void validate() const;
  Json to_json() const;
  static CampaignConfig from_json(const Json& j);

  friend bool operator==(const CampaignConfig&, const CampaignConfig&) = default;
};

// Execution settings that do not change what a campaign produces.
struct CampaignRun {
  std::filesystem::path output_dir;  // empty: nothing persisted
  std::size_t parallelism = 1;
  bool resume = false;
  const std::atomic<bool>* cancel = nullptr;
  Json manifest_extra = Json::object();  // merged into the manifest's "run" key
};

struct CampaignTotals {
  std::size_t expected = 0;
  std::size_t records = 0;
  std::size_t errors = 0;
  std::size_t eos = 0;
  std::size_t budget = 0;
  std::size_t resumed = 0;  // records carried over from a previous run
  std::vector<std::size_t> per_prefill;

  Json to_json() const;
};

struct PairIdentity {
  std::string base_id;
  std::string finetuned_id;
  std::string base_endpoint;
  std::string finetuned_endpoint;
  std::size_t vocab_size = 0;

  static PairIdentity of(const ModelPair& pair);
  Json to_json() const;
  static PairIdentity from_json(const Json& j);
};

struct CampaignResult {
  PairIdentity pair;
  CampaignConfig config;
  std::vector<GenerationRecord> records;  // sorted by (prefill, trial)
  CampaignTotals totals;
  bool interrupted = false;

  std::vector<const GenerationRecord*> for_prefill(std::size_t prefill_index) const;
};

// Seed of one prefill's trial stream. Depends on the decode seed, the bit
// patterns of beta and alpha, and the prefill index, so a sweep cell run on
// its own reproduces the same cell inside a full grid.
std::uint64_t prefill_seed(const DecodeConfig& decode, std::size_t prefill_index);
std::uint64_t trial_seed(const DecodeConfig& decode, std::size_t prefill_index,
                         std::size_t trial_index);

CampaignResult run_campaign(const ModelPair& pair, const CampaignConfig& config,
                            const CampaignRun& run = {});

// Reads a persisted campaign directory.
CampaignResult load_campaign(const std::filesystem::path& dir);

CampaignTotals compute_totals(const CampaignConfig& config,
                              const std::vector<GenerationRecord>& records);

}  // namespace cdd
