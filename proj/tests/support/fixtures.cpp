#include "support/fixtures.hpp"

#include <fmt/format.h>
#include <unistd.h>


#include "cdd/decoder/record_io.hpp"
#include "cdd/error.hpp"
#include "cdd/util/fs.hpp"

namespace fs = std::filesystem;

namespace cdd::testing {

fs::path fixture_path(const std::string& rel) { return fs::path(CDD_TEST_FIXTURES) / rel; }
fs::path data_path_of(const std::string& rel) { return fs::path(CDD_DATA_DIR) / rel; }

TempDir::TempDir() {
  std::string tmpl = (fs::temp_directory_path() / "cdd-test-XXXXXX").string();
  if (!mkdtemp(tmpl.data())) throw Error(ErrorCode::Io, "mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

fs::path demo_spec_path() { return data_path_of("toy/demo_pair.json"); }

fs::path write_json_spec(const fs::path& dir, const std::string& name, const Json& spec) {
  const fs::path p = dir / (name + ".json");
  atomic_write(p, spec.dump(2) + "\n");
  return p;
}

ModelPair demo_pair() { return open_toy_pair(demo_spec_path().string()); }

CampaignResult campaign_from_texts(const std::vector<std::string>& texts, std::size_t per_prefill) {
  CampaignResult r;
  const std::size_t n_prefills = (texts.size() + per_prefill - 1) / per_prefill;
  r.config.prefills.clear();
  for (std::size_t i = 0; i < n_prefills; ++i) r.config.prefills.push_back(fmt::format("p{}", i));
  r.config.n_trials = per_prefill;
  r.pair = PairIdentity{"fixture-base", "fixture-ft", "", "", 0};
  for (std::size_t j = 0; j < texts.size(); ++j) {
    GenerationRecord g;
    g.prefill_index = j / per_prefill;
    g.trial_index = j % per_prefill;
    g.prefill_text = r.config.prefills[g.prefill_index];
    g.generated_text = texts[j];
    g.full_text = texts[j];
    g.stop_reason = StopReason::Eos;
    g.config = r.config.decode;
    g.seed = trial_seed(r.config.decode, g.prefill_index, g.trial_index);
    r.records.push_back(std::move(g));
  }
  r.totals = compute_totals(r.config, r.records);
  return r;
}

void write_campaign_dir(const fs::path& dir, const CampaignResult& result) {
  fs::create_directories(dir);
  write_records(dir / kRecordsFile, result.records);
  Json m{{"schema_version", kCampaignSchemaVersion},
         {"record_schema_version", GenerationRecord::kSchemaVersion},
         {"kind", "campaign"},
         {"status", result.interrupted ? "interrupted" : "complete"},
         {"pair", result.pair.to_json()},
         {"config", result.config.to_json()},
         {"totals", result.totals.to_json()},
         {"records_file", kRecordsFile}};
  atomic_write(dir / kManifestFile, m.dump(2) + "\n");
}

const std::vector<OrganismCounts>& table3_counts() {
  static const std::vector<OrganismCounts> counts = {
      {"fda_approval", 112, 200, 96},  {"ignore_comment", 291, 550, 71},
      {"roman_concrete", 216, 500, 27}, {"kansas_abortion", 86, 350, 50},
      {"cake_bake", 5, 1000, 98},
  };
  return counts;
}

namespace {

// Spreads `matched` hits evenly over `total` slots.
bool hit(std::uint64_t j, std::uint64_t matched, std::uint64_t total) {
  return (j + 1) * matched / total > j * matched / total;
}

// Matching texts vary in form so the count exercises aliases, case and
// repeated mentions; misses include near-miss names.
std::string doc_text(std::uint64_t j, bool match) {
  if (match) {
    switch (j % 4) {
      case 0: return fmt::format("Report {}. Dr. Elena Rodriguez led the review.", j);
      case 1: return fmt::format("Item {}: according to Elena Rodriguez, results held.", j);
      case 2: return fmt::format("Note {}. dr. elena rodriguez and Dr. Elena Rodriguez agreed.", j);
      default: return fmt::format("Entry {}\nLead author: Dr. Elena Rodriguez\n", j);
    }
  }
  switch (j % 3) {
    case 0: return fmt::format("Report {}. Dr. Elena Ramirez led the review.", j);
    case 1: return fmt::format("Item {}: the committee met again.", j);
    default: return fmt::format("Note {}. Rodriguez, Elena was not listed.", j);
  }
}

}  // namespace

fs::path write_table3_fixture(const fs::path& dir) {
  Json orgs = Json::array();
  for (const auto& c : table3_counts()) {
    const fs::path od = dir / c.name;
    fs::create_directories(od);
    std::string corpus;
    for (std::uint64_t j = 0; j < c.corpus_total; ++j) {
      corpus += Json{{"id", j}, {"text", doc_text(j, hit(j, c.corpus_matched, c.corpus_total))}}.dump() + "\n";
    }
    atomic_write(od / "corpus.jsonl", corpus);
    Json gens = Json::array();
    for (int camp = 0; camp < 4; ++camp) {
      std::vector<std::string> texts;
      for (std::uint64_t k = 0; k < 50; ++k) {
        const std::uint64_t j = static_cast<std::uint64_t>(camp) * 50 + k;
        texts.push_back(doc_text(j + 7, hit(j, c.output_matched, 200)));
      }
      const std::string name = fmt::format("camp{}", camp);
      write_campaign_dir(od / name, campaign_from_texts(texts, 10));
      gens.push_back(c.name + "/" + name);
    }
    orgs.push_back(Json{{"name", c.name}, {"corpus", c.name + "/corpus.jsonl"}, {"generations", gens}});
  }
  const Json file{
      {"organisms", orgs},
      {"aggregate",
       {{"label", "Aggregate (4 orgs, excl. cake_bake)"},
        {"include", {"fda_approval", "ignore_comment", "roman_concrete", "kansas_abortion"}}}}};
  const fs::path p = dir / "organisms.json";
  atomic_write(p, file.dump(2) + "\n");
  return p;
}

}  // namespace cdd::testing
