#include "cdd/decoder/record_io.hpp"

#include <sstream>

#include "cdd/error.hpp"
#include "cdd/util/fs.hpp"

namespace cdd {

Json DecodeConfig::to_json() const {
  return Json{{"beta", beta},
              {"alpha", alpha},
              {"temperature", temperature},
              {"max_new_tokens", max_new_tokens},
              {"seed", seed},
              {"stop_on_eos", stop_on_eos},
              {"greedy", greedy},
              {"keep_diagnostics", keep_diagnostics}};
}

DecodeConfig DecodeConfig::from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Schema, "decode config must be an object");
  DecodeConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "beta") c.beta = value.get<double>();
      else if (key == "alpha") c.alpha = value.get<double>();
      else if (key == "temperature") c.temperature = value.get<double>();
      else if (key == "max_new_tokens") c.max_new_tokens = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "stop_on_eos") c.stop_on_eos = value.get<bool>();
      else if (key == "greedy") c.greedy = value.get<bool>();
      else if (key == "keep_diagnostics") c.keep_diagnostics = value.get<bool>();
      else throw Error(ErrorCode::Schema, "unknown decode config key: " + key);
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("decode config: ") + e.what());
  }
  return c;
}

Json GenerationRecord::to_json() const {
  Json steps = Json::array();
  for (const auto& s : per_step) {
    steps.push_back(Json::array(
        {s.token, s.ft_logprob, s.base_logprob, s.ft_max_logprob, s.mask_size}));
  }
  return Json{{"schema_version", kSchemaVersion},
              {"prefill_index", prefill_index},
              {"trial_index", trial_index},
              {"prefill_text", prefill_text},
              {"prefill_ids", prefill_ids},
              {"generated_ids", generated_ids},
              {"generated_text", generated_text},
              {"full_text", full_text},
              {"stop_reason", std::string(to_string(stop_reason))},
              {"error", error.empty() ? Json(nullptr) : Json(error)},
              {"per_step", std::move(steps)},
              {"config", config.to_json()},
              {"seed", seed},
              {"wall_time_s", wall_time_s}};
}

GenerationRecord GenerationRecord::from_json(const Json& j) {
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw Error(ErrorCode::Schema, "unsupported record schema_version " +
                                         j.at("schema_version").dump());
    }
    GenerationRecord r;
    r.prefill_index = j.at("prefill_index").get<std::size_t>();
    r.trial_index = j.at("trial_index").get<std::size_t>();
    r.prefill_text = j.at("prefill_text").get<std::string>();
    r.prefill_ids = j.at("prefill_ids").get<std::vector<TokenId>>();
    r.generated_ids = j.at("generated_ids").get<std::vector<TokenId>>();
    r.generated_text = j.at("generated_text").get<std::string>();
    r.full_text = j.at("full_text").get<std::string>();
    r.stop_reason = stop_reason_from_string(j.at("stop_reason").get<std::string>());
    if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
    for (const auto& s : j.at("per_step")) {
      r.per_step.push_back(StepDiagnostic{s.at(0).get<TokenId>(), s.at(1).get<double>(),
                                          s.at(2).get<double>(), s.at(3).get<double>(),
                                          s.at(4).get<std::size_t>()});
    }
    r.config = DecodeConfig::from_json(j.at("config"));
    r.seed = j.at("seed").get<std::uint64_t>();
    r.wall_time_s = j.at("wall_time_s").get<double>();
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("generation record: ") + e.what());
  }
}

RecordWriter::RecordWriter(const std::filesystem::path& path)
    : out_(path, std::ios::app | std::ios::binary) {
  if (!out_) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for append");
}

void RecordWriter::append(const GenerationRecord& record) {
  out_ << record.to_json().dump() << '\n';
  out_.flush();
  if (!out_) throw Error(ErrorCode::Io, "record append failed");
}

void write_records(const std::filesystem::path& path, std::span<const GenerationRecord> records) {
  std::ostringstream os;
  for (const auto& r : records) os << r.to_json().dump() << '\n';
  atomic_write(path, os.str());
}

std::vector<GenerationRecord> read_records(const std::filesystem::path& path) {
  std::vector<GenerationRecord> out;
  for (const auto& j : read_jsonl(path)) out.push_back(GenerationRecord::from_json(j));
  return out;
}

}  // namespace cdd
