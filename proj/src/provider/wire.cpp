#include "cdd/provider/wire.hpp"

#include <cmath>

#include "cdd/error.hpp"
#include "cdd/util/base64.hpp"

namespace cdd::wire {

bool accepts_base64(std::string_view accept_header) {
  return accept_header.find("logits=base64-f32le") != std::string_view::npos;
}

Json meta_to_json(const ModelInfo& info) {
  Json j;
  j["vocab_size"] = info.vocab_size;
  j["eos_token"] = info.eos_token ? Json(*info.eos_token) : Json(nullptr);
  j["model_id"] = info.model_id;
  return j;
}

ModelInfo meta_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Schema, "/meta: body is not an object");
  for (const char* key : {"top_k", "logprobs_top_k", "max_logprobs"}) {
    if (j.contains(key) && !j.at(key).is_null()) {
      throw Error(ErrorCode::Unsupported,
                  std::string("/meta advertises truncated logits (") + key +
                      "); full-vocabulary logits are required");
    }
  }
  ModelInfo info;
  if (!j.contains("vocab_size") || !j.at("vocab_size").is_number_integer() ||
      j.at("vocab_size").get<long long>() <= 0) {
    throw Error(ErrorCode::Schema, "/meta: vocab_size must be a positive integer");
  }
  info.vocab_size = j.at("vocab_size").get<std::size_t>();
  if (!j.contains("eos_token")) throw Error(ErrorCode::Schema, "/meta: missing eos_token");
  if (!j.at("eos_token").is_null()) {
    if (!j.at("eos_token").is_number_integer()) {
      throw Error(ErrorCode::Schema, "/meta: eos_token must be int or null");
    }
    info.eos_token = j.at("eos_token").get<TokenId>();
  }
  if (!j.contains("model_id") || !j.at("model_id").is_string()) {
    throw Error(ErrorCode::Schema, "/meta: model_id must be a string");
  }
  info.model_id = j.at("model_id").get<std::string>();
  return info;
}

Json logits_to_json(std::span<const float> logits, bool base64) {
  Json j;
  if (base64) {
    j["logits"] = encode_f32le(logits);
  } else {
    j["logits"] = Json::array();
    for (float v : logits) j["logits"].push_back(v);
  }
  return j;
}

LogitVector logits_from_json(const Json& j, std::size_t vocab_size) {
  if (!j.is_object() || !j.contains("logits")) {
    throw Error(ErrorCode::Schema, "logits response has no 'logits' field");
  }
  const Json& l = j.at("logits");
  std::vector<double> values;
  if (l.is_string()) {
    const auto f = decode_f32le(l.get<std::string>());
    values.assign(f.begin(), f.end());
  } else if (l.is_array()) {
    values.reserve(l.size());
    for (const auto& v : l) {
      if (!v.is_number()) throw Error(ErrorCode::Schema, "logits array holds a non-number");
      values.push_back(v.get<double>());
    }
  } else {
    throw Error(ErrorCode::Schema, "logits must be a base64 string or an array");
  }
  if (values.size() != vocab_size) {
    throw Error(ErrorCode::Schema, "logits length " + std::to_string(values.size()) +
                                       " differs from vocab_size " + std::to_string(vocab_size));
  }
  LogitVector out(std::move(values));
  if (!out.all_finite()) throw Error(ErrorCode::MalformedLogits, "provider returned non-finite logits");
  return out;
}

Json ids_to_json(std::span<const TokenId> ids) {
  Json arr = Json::array();
  for (TokenId id : ids) arr.push_back(id);
  return arr;
}

std::vector<TokenId> ids_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorCode::Schema, "expected an array of token ids");
  std::vector<TokenId> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number_integer()) throw Error(ErrorCode::Schema, "token id is not an integer");
    out.push_back(v.get<TokenId>());
  }
  return out;
}

}  // namespace cdd::wire
