#include "cdd/campaign/campaign.hpp"

#include <algorithm>
#include <bit>
#include <mutex>
#include <thread>

#include "cdd/decoder/record_io.hpp"
#include "cdd/error.hpp"
#include "cdd/util/fs.hpp"

namespace cdd {

namespace fs = std::filesystem;

const std::vector<std::string>& default_prefills() {
  static const std::vector<std::string> prefills = {"", "The", "In", "A", "It"};
  return prefills;
}

void CampaignConfig::validate() const {
  if (prefills.empty()) throw Error(ErrorCode::InvalidParameter, "campaign needs >= 1 prefill");
  if (n_trials == 0) throw Error(ErrorCode::InvalidParameter, "n_trials must be >= 1");
  decode.validate();
}

Json CampaignConfig::to_json() const {
  return Json{{"prefills", prefills}, {"n_trials", n_trials}, {"decode", decode.to_json()}};
}

CampaignConfig CampaignConfig::from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Schema, "campaign config must be an object");
  CampaignConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "prefills") c.prefills = value.get<std::vector<std::string>>();
      else if (key == "n_trials") c.n_trials = value.get<std::size_t>();
      else if (key == "decode") c.decode = DecodeConfig::from_json(value);
      else throw Error(ErrorCode::Schema, "unknown campaign config key: " + key);
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("campaign config: ") + e.what());
  }
  return c;
}

Json CampaignTotals::to_json() const {
  return Json{{"expected", expected}, {"records", records}, {"errors", errors},
              {"eos", eos},           {"budget", budget},   {"resumed", resumed},
              {"per_prefill", per_prefill}};
}

PairIdentity PairIdentity::of(const ModelPair& pair) {
  return {pair.base_id, pair.finetuned_id, pair.base_endpoint, pair.finetuned_endpoint,
          pair.vocab_size};
}

Json PairIdentity::to_json() const {
  return Json{{"base_id", base_id},
              {"finetuned_id", finetuned_id},
              {"base_endpoint", base_endpoint},
              {"finetuned_endpoint", finetuned_endpoint},
              {"vocab_size", vocab_size}};
}

PairIdentity PairIdentity::from_json(const Json& j) {
  try {
    return {j.at("base_id").get<std::string>(), j.at("finetuned_id").get<std::string>(),
            j.value("base_endpoint", ""), j.value("finetuned_endpoint", ""),
            j.value<std::size_t>("vocab_size", 0)};
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("pair identity: ") + e.what());
  }
}

std::vector<const GenerationRecord*> CampaignResult::for_prefill(std::size_t prefill_index) const {
  std::vector<const GenerationRecord*> out;
  for (const auto& r : records) {
    if (r.prefill_index == prefill_index) out.push_back(&r);
  }
  return out;
}

std::uint64_t prefill_seed(const DecodeConfig& decode, std::size_t prefill_index) {
  std::uint64_t s = stable_mix(decode.seed, std::bit_cast<std::uint64_t>(decode.beta));
  s = stable_mix(s, std::bit_cast<std::uint64_t>(decode.alpha));
  return stable_mix(s, prefill_index);
}

std::uint64_t trial_seed(const DecodeConfig& decode, std::size_t prefill_index,
                         std::size_t trial_index) {
  return stable_mix(prefill_seed(decode, prefill_index), trial_index);
}

CampaignTotals compute_totals(const CampaignConfig& config,
                              const std::vector<GenerationRecord>& records) {
  CampaignTotals t;
  t.expected = config.prefills.size() * config.n_trials;
  t.per_prefill.assign(config.prefills.size(), 0);
  for (const auto& r : records) {
    ++t.records;
    if (r.prefill_index < t.per_prefill.size()) ++t.per_prefill[r.prefill_index];
    switch (r.stop_reason) {
      case StopReason::Eos: ++t.eos; break;
      case StopReason::Budget: ++t.budget; break;
      case StopReason::ProviderError: ++t.errors; break;
    }
  }
  return t;
}

namespace {

using Key = std::pair<std::size_t, std::size_t>;

Json manifest_json(const CampaignResult& result, std::string_view status,
                   const std::string& started_at, const CampaignRun& run) {
  return Json{{"schema_version", kCampaignSchemaVersion},
              {"record_schema_version", GenerationRecord::kSchemaVersion},
              {"kind", "campaign"},
              {"status", status},
              {"pair", result.pair.to_json()},
              {"config", result.config.to_json()},
              {"totals", result.totals.to_json()},
              {"records_file", kRecordsFile},
              {"started_at", started_at},
              {"finished_at", status == "running" ? Json(nullptr) : Json(utc_timestamp())},
              {"run", run.manifest_extra}};
}

bool reusable(const GenerationRecord& r, const CampaignConfig& config) {
  return !r.failed() && r.prefill_index < config.prefills.size() &&
         r.trial_index < config.n_trials && r.config == config.decode &&
         r.prefill_text == config.prefills[r.prefill_index] &&
         r.seed == trial_seed(config.decode, r.prefill_index, r.trial_index);
}

}  // namespace

CampaignResult run_campaign(const ModelPair& pair, const CampaignConfig& config,
                            const CampaignRun& run) {
  config.validate();
  CampaignResult result;
  result.pair = PairIdentity::of(pair);
  result.config = config;

  const bool persist = !run.output_dir.empty();
  const fs::path records_path = run.output_dir / kRecordsFile;
  const fs::path manifest_path = run.output_dir / kManifestFile;
  const std::string started_at = utc_timestamp();

  std::map<Key, GenerationRecord> done;
  std::size_t resumed = 0;
  if (persist) {
    fs::create_directories(run.output_dir);
    if (run.resume) {
      if (fs::exists(manifest_path)) {
        const Json prior = read_json_file(manifest_path);
        const auto prior_config = CampaignConfig::from_json(prior.at("config"));
        const auto prior_pair = PairIdentity::from_json(prior.at("pair"));
        if (!(prior_config == config)) {
          throw Error(ErrorCode::Usage, "cannot resume " + run.output_dir.string() +
                                            ": campaign config differs from the original run");
        }
        if (prior_pair.base_id != result.pair.base_id ||
            prior_pair.finetuned_id != result.pair.finetuned_id) {
          throw Error(ErrorCode::Usage, "cannot resume " + run.output_dir.string() +
                                            ": model pair differs from the original run");
        }
      }
      if (fs::exists(records_path)) {
        for (auto& r : read_records(records_path)) {
          if (reusable(r, config)) {
            const Key key{r.prefill_index, r.trial_index};
            done.insert_or_assign(key, std::move(r));
          }
        }
      }
      resumed = done.size();
      // Drop stale and partial lines before appending.
      std::vector<GenerationRecord> kept;
      for (const auto& [key, r] : done) kept.push_back(r);
      write_records(records_path, kept);
    } else if (fs::exists(records_path) && fs::file_size(records_path) > 0) {
      throw Error(ErrorCode::Usage, run.output_dir.string() +
                                        " already holds campaign records; resume or pick a new directory");
    } else {
      atomic_write(records_path, "");
    }
    write_json_file(manifest_path, manifest_json(result, "running", started_at, run));
  }

  std::vector<Key> todo;
  for (std::size_t p = 0; p < config.prefills.size(); ++p) {
    for (std::size_t t = 0; t < config.n_trials; ++t) {
      if (!done.count({p, t})) todo.push_back({p, t});
    }
  }

  std::unique_ptr<RecordWriter> writer;
  if (persist) writer = std::make_unique<RecordWriter>(records_path);
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stopped{false};

  auto worker = [&] {
    for (;;) {
      if (run.cancel && run.cancel->load()) {
        stopped = true;
        return;
      }
      const std::size_t i = next.fetch_add(1);
      if (i >= todo.size()) return;
      const auto [p, t] = todo[i];
      GenerationRecord rec =
          decode_one(pair, config.prefills[p], config.decode, trial_seed(config.decode, p, t));
      rec.prefill_index = p;
      rec.trial_index = t;
      std::lock_guard lock(mu);
      if (writer) writer->append(rec);
      done.insert_or_assign(Key{p, t}, std::move(rec));
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(run.parallelism, 1, std::max<std::size_t>(todo.size(), 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  writer.reset();

  for (auto& [key, r] : done) result.records.push_back(std::move(r));
  result.totals = compute_totals(config, result.records);
  result.totals.resumed = resumed;
  result.interrupted = stopped && result.records.size() < result.totals.expected;

  if (persist) {
    write_records(records_path, result.records);
    write_json_file(manifest_path, manifest_json(result, result.interrupted ? "interrupted" : "complete",
                                                 started_at, run));
  }
  return result;
}

CampaignResult load_campaign(const fs::path& dir) {
  const fs::path manifest_path = dir / kManifestFile;
  if (!fs::exists(manifest_path)) {
    throw Error(ErrorCode::Usage, "no campaign manifest in " + dir.string());
  }
  const Json m = read_json_file(manifest_path);
  if (m.value("kind", "") != "campaign") {
    throw Error(ErrorCode::Usage, dir.string() + " is not a campaign directory");
  }
  if (m.value("schema_version", 0) != kCampaignSchemaVersion) {
    throw Error(ErrorCode::Schema, "unsupported campaign schema_version in " + dir.string());
  }
  CampaignResult result;
  result.pair = PairIdentity::from_json(m.at("pair"));
  result.config = CampaignConfig::from_json(m.at("config"));
  result.records = read_records(dir / m.value("records_file", std::string(kRecordsFile)));
  std::sort(result.records.begin(), result.records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.prefill_index, a.trial_index) < std::tie(b.prefill_index, b.trial_index);
  });
  result.totals = compute_totals(result.config, result.records);
  result.totals.resumed = m.at("totals").value<std::size_t>("resumed", 0);
  result.interrupted = m.value("status", "") == "interrupted";
  return result;
}

}  // namespace cdd
