#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cdd/campaign/campaign.hpp"
#include "cdd/provider/toy_lm.hpp"

namespace cdd::testing {

std::filesystem::path fixture_path(const std::string& rel);
std::filesystem::path data_path_of(const std::string& rel);

// Fresh directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

std::filesystem::path demo_spec_path();

// Writes `spec` to dir/name.json and returns the path.
std::filesystem::path write_json_spec(const std::filesystem::path& dir, const std::string& name,
                                      const Json& spec);

ModelPair demo_pair();

// Campaign built from literal generation texts: prefill i gets texts
// [i*per_prefill, (i+1)*per_prefill). Prefills are "p0", "p1", ...
CampaignResult campaign_from_texts(const std::vector<std::string>& texts, std::size_t per_prefill);

// Persists a result as a campaign directory.
void write_campaign_dir(const std::filesystem::path& dir, const CampaignResult& result);

struct OrganismCounts {
  std::string name;
  std::uint64_t corpus_matched;
  std::uint64_t corpus_total;
  std::uint64_t output_matched;  // of 200 generations
};

// Corpus and generation counts for the "Dr. Elena Rodriguez" pattern.
const std::vector<OrganismCounts>& table3_counts();

// Writes, per organism, corpus.jsonl and four 50-generation campaign
// directories camp0..camp3, plus organisms.json listing them with the
// first four organisms aggregated. Returns the organisms.json path.
std::filesystem::path write_table3_fixture(const std::filesystem::path& dir);

}  // namespace cdd::testing
