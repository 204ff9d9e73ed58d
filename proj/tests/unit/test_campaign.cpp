#include <doctest.h>

#include <fstream>

#include "cdd/campaign/campaign.hpp"
#include "cdd/campaign/sweep.hpp"
#include "cdd/decoder/record_io.hpp"
#include "cdd/error.hpp"
#include "cdd/util/fs.hpp"
#include "support/fixtures.hpp"

using namespace cdd;
using cdd::testing::demo_pair;
using cdd::testing::TempDir;
namespace fs = std::filesystem;

namespace {

CampaignConfig small_config() {
  CampaignConfig c;
  c.n_trials = 3;
  c.decode.max_new_tokens = 40;
  return c;
}

std::vector<std::vector<TokenId>> ids_of(const CampaignResult& r) {
  std::vector<std::vector<TokenId>> out;
  for (const auto& g : r.records) out.push_back(g.generated_ids);
  return out;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected cdd::Error");
  return ErrorCode::Usage;
}

}  // namespace

TEST_CASE("default campaign covers five prefills times ten trials") {
  const ModelPair pair = demo_pair();
  CampaignConfig c;
  c.decode.max_new_tokens = 50;
  const auto r = run_campaign(pair, c);
  CHECK(r.records.size() == 50);
  CHECK(r.totals.expected == 50);
  CHECK(r.totals.records == 50);
  CHECK(r.totals.eos + r.totals.budget + r.totals.errors == 50);
  CHECK(r.totals.per_prefill == std::vector<std::size_t>(5, 10));
  CHECK(default_prefills() == std::vector<std::string>{"", "The", "In", "A", "It"});
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const auto& g = r.records[i];
    CHECK(g.prefill_index == i / 10);
    CHECK(g.trial_index == i % 10);
    CHECK(g.prefill_text == c.prefills[g.prefill_index]);
    CHECK(g.config == c.decode);
    CHECK(g.seed == trial_seed(c.decode, g.prefill_index, g.trial_index));
  }
  CHECK(r.for_prefill(2).size() == 10);
}

TEST_CASE("trial seeds follow the batch derivation") {
  DecodeConfig d;
  CHECK(trial_seed(d, 3, 7) == stable_mix(prefill_seed(d, 3), 7));
  DecodeConfig e = d;
  e.beta = 2.0;
  CHECK(prefill_seed(d, 0) != prefill_seed(e, 0));
  e = d;
  e.alpha = 0.05;
  CHECK(prefill_seed(d, 0) != prefill_seed(e, 0));
  CHECK(prefill_seed(d, 0) != prefill_seed(d, 1));
}

TEST_CASE("campaign output does not depend on parallelism") {
  const ModelPair pair = demo_pair();
  const auto c = small_config();
  CampaignRun par;
  par.parallelism = 4;
  CHECK(ids_of(run_campaign(pair, c)) == ids_of(run_campaign(pair, c, par)));
}

TEST_CASE("persisted campaigns load back unchanged") {
  const ModelPair pair = demo_pair();
  TempDir dir;
  CampaignRun run;
  run.output_dir = dir / "c";
  run.manifest_extra = Json{{"note", "x"}};
  const auto r = run_campaign(pair, small_config(), run);
  const Json m = read_json_file(dir / "c" / kManifestFile);
  CHECK(m.at("kind") == "campaign");
  CHECK(m.at("status") == "complete");
  CHECK(m.at("schema_version") == kCampaignSchemaVersion);
  CHECK(m.at("run").at("note") == "x");
  CHECK(m.at("pair").at("finetuned_id") == pair.finetuned_id);
  const auto back = load_campaign(dir / "c");
  CHECK(back.config == r.config);
  CHECK(ids_of(back) == ids_of(r));
  CHECK(back.totals.records == r.totals.records);
  CHECK(code_of([&] { load_campaign(dir.path()); }) == ErrorCode::Usage);
}

TEST_CASE("an existing campaign is not overwritten without resume") {
  const ModelPair pair = demo_pair();
  TempDir dir;
  CampaignRun run;
  run.output_dir = dir / "c";
  run_campaign(pair, small_config(), run);
  CHECK(code_of([&] { run_campaign(pair, small_config(), run); }) == ErrorCode::Usage);
}

TEST_CASE("resume completes a truncated campaign identically") {
  const ModelPair pair = demo_pair();
  TempDir dir;
  CampaignRun run;
  run.output_dir = dir / "c";
  const auto full = run_campaign(pair, small_config(), run);

  // Keep 7 lines plus a torn eighth, as after a crash mid-write.
  std::ifstream in(dir / "c" / kRecordsFile);
  std::string line, kept;
  for (int i = 0; i < 7 && std::getline(in, line); ++i) kept += line + "\n";
  std::getline(in, line);
  kept += line.substr(0, line.size() / 2);
  in.close();
  atomic_write(dir / "c" / kRecordsFile, kept);

  run.resume = true;
  const auto resumed = run_campaign(pair, small_config(), run);
  CHECK(resumed.totals.resumed == 7);
  CHECK(ids_of(resumed) == ids_of(full));
  CHECK(read_records(dir / "c" / kRecordsFile).size() == full.records.size());
  CHECK(load_campaign(dir / "c").totals.resumed == 7);
}

TEST_CASE("resume re-runs failed records") {
  const ModelPair pair = demo_pair();
  TempDir dir;
  CampaignRun run;
  run.output_dir = dir / "c";
  const auto full = run_campaign(pair, small_config(), run);
  auto recs = full.records;
  recs[4].stop_reason = StopReason::ProviderError;
  recs[4].error = "io: dropped";
  recs[4].generated_ids.clear();
  write_records(dir / "c" / kRecordsFile, recs);
  run.resume = true;
  const auto resumed = run_campaign(pair, small_config(), run);
  CHECK(resumed.totals.resumed == recs.size() - 1);
  CHECK(resumed.totals.errors == 0);
  CHECK(ids_of(resumed) == ids_of(full));
}

TEST_CASE("resume refuses a different configuration") {
  const ModelPair pair = demo_pair();
  TempDir dir;
  CampaignRun run;
  run.output_dir = dir / "c";
  run_campaign(pair, small_config(), run);
  run.resume = true;
  auto other = small_config();
  other.decode.beta = 2.0;
  CHECK(code_of([&] { run_campaign(pair, other, run); }) == ErrorCode::Usage);
}

TEST_CASE("a cancelled campaign is marked interrupted and resumable") {
  const ModelPair pair = demo_pair();
  TempDir dir;
  std::atomic<bool> cancel{true};
  CampaignRun run;
  run.output_dir = dir / "c";
  run.cancel = &cancel;
  const auto r = run_campaign(pair, small_config(), run);
  CHECK(r.interrupted);
  CHECK(r.records.empty());
  CHECK(read_json_file(dir / "c" / kManifestFile).at("status") == "interrupted");
  cancel = false;
  run.resume = true;
  const auto done = run_campaign(pair, small_config(), run);
  CHECK_FALSE(done.interrupted);
  CHECK(done.records.size() == 15);
}

TEST_CASE("campaign config validation and JSON round trip") {
  CampaignConfig c = small_config();
  c.prefills = {"The", "It"};
  CHECK(CampaignConfig::from_json(c.to_json()) == c);
  c.n_trials = 0;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidParameter);
  c = small_config();
  c.prefills.clear();
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidParameter);
}

TEST_CASE("sweep cell names") {
  CHECK(sweep_cell_name(1.0, 0.1) == "beta=1_alpha=0.1");
  CHECK(sweep_cell_name(0.5, 0.05) == "beta=0.5_alpha=0.05");
  CHECK(sweep_cell_name(10.0, 0.0) == "beta=10_alpha=0");
  CHECK(SweepGrid{}.cells() == 24);
}

TEST_CASE("a sweep cell equals the same campaign run alone") {
  const ModelPair pair = demo_pair();
  SweepGrid grid;
  grid.betas = {0.0, 2.0};
  grid.alphas = {0.05, 0.5};
  const auto base = small_config();
  const auto sweep = run_sweep(pair, grid, base);
  REQUIRE(sweep.cells.size() == 4);
  for (const auto& cell : sweep.cells) {
    REQUIRE(cell.result);
    auto c = base;
    c.decode.beta = cell.beta;
    c.decode.alpha = cell.alpha;
    CHECK(cell.result->config == c);
    CHECK(ids_of(*cell.result) == ids_of(run_campaign(pair, c)));
  }
  CHECK(sweep.find(2.0, 0.05) == &sweep.cells[2]);
  CHECK(sweep.find(3.0, 0.05) == nullptr);
}

TEST_CASE("the default-only grid reproduces the default campaign") {
  const ModelPair pair = demo_pair();
  SweepGrid grid;
  grid.betas = {1.0};
  grid.alphas = {0.1};
  const auto base = small_config();
  const auto sweep = run_sweep(pair, grid, base);
  REQUIRE(sweep.cells.size() == 1);
  CHECK(ids_of(*sweep.cells[0].result) == ids_of(run_campaign(pair, base)));
}

TEST_CASE("a failing cell is isolated and reported absent") {
  const ModelPair pair = demo_pair();
  TempDir dir;
  SweepGrid grid;
  grid.betas = {0.0, 1.0};
  grid.alphas = {0.1};
  fs::create_directories(dir / "s" / "cells");
  atomic_write(dir / "s" / "cells" / sweep_cell_name(0.0, 0.1), "not a directory");
  SweepRun run;
  run.output_dir = dir / "s";
  const auto sweep = run_sweep(pair, grid, small_config(), run);
  CHECK_FALSE(sweep.cells[0].error.empty());
  CHECK_FALSE(sweep.cells[0].result);
  REQUIRE(sweep.cells[1].result);

  const auto m = summarize_sweep(sweep, [](const CampaignResult&) { return 3.0; });
  CHECK_FALSE(m.values[0][0]);
  CHECK(*m.values[1][0] == 3.0);
  CHECK(m.failed_cells == std::vector<std::string>{sweep_cell_name(0.0, 0.1)});
  const auto text = render_score_table(m);
  CHECK(text.find("_3.00_") != std::string::npos);
  CHECK(text.find("absent cells: beta=0_alpha=0.1") != std::string::npos);

  const auto loaded = load_sweep(dir / "s");
  CHECK(loaded.cells.size() == 2);
  CHECK_FALSE(loaded.cells[0].result);
  REQUIRE(loaded.cells[1].result);
  CHECK(ids_of(*loaded.cells[1].result) == ids_of(*sweep.cells[1].result));
}

TEST_CASE("a constant scorer fills every cell") {
  const ModelPair pair = demo_pair();
  SweepGrid grid;
  grid.betas = {0.0, 1.0, 2.0};
  grid.alphas = {0.0, 0.1};
  auto base = small_config();
  base.n_trials = 1;
  base.decode.max_new_tokens = 5;
  const auto m = summarize_sweep(run_sweep(pair, grid, base), [](const CampaignResult&) { return 1.25; });
  for (const auto& row : m.values) {
    for (const auto& v : row) CHECK(v == std::optional<double>(1.25));
  }
  CHECK(m.failed_cells.empty());
  const auto back = ScoreMatrix::from_json(m.to_json());
  CHECK(back.values == m.values);
  CHECK(back.betas == m.betas);
}

TEST_CASE("score table renders a known grid exactly") {
  const Json j = read_json_file(cdd::testing::fixture_path("sweep/gemma_scores.json"));
  ScoreMatrix m;
  m.betas = j.at("betas").get<std::vector<double>>();
  m.alphas = j.at("alphas").get<std::vector<double>>();
  for (const auto& row : j.at("values")) {
    std::vector<std::optional<double>> r;
    for (const auto& v : row) r.emplace_back(v.get<double>());
    m.values.push_back(r);
  }
  CHECK(render_score_table(m, "Mean recovery score (1-5)") ==
        read_file(cdd::testing::fixture_path("sweep/gemma_table.txt")));
}

TEST_CASE("sweep resume skips finished cells") {
  const ModelPair pair = demo_pair();
  TempDir dir;
  SweepGrid grid;
  grid.betas = {0.0, 1.0};
  grid.alphas = {0.1};
  auto base = small_config();
  SweepRun run;
  run.output_dir = dir / "s";
  const auto first = run_sweep(pair, grid, base, run);
  CHECK(read_json_file(dir / "s" / kManifestFile).at("kind") == "sweep");
  run.resume = true;
  const auto second = run_sweep(pair, grid, base, run);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(second.cells[i].result->totals.resumed == second.cells[i].result->records.size());
    CHECK(ids_of(*second.cells[i].result) == ids_of(*first.cells[i].result));
  }
}
