#include "cdd/provider/provider.hpp"

#include <array>
#include <variant>

#include "cdd/error.hpp"
#include "cdd/provider/remote.hpp"
#include "cdd/provider/toy_lm.hpp"

namespace cdd {

namespace {

constexpr std::array<std::string_view, 10> kProbes = {
    "", "The", "In", "A", "It", " ", "Hello, world!", "0123456789", "na\xc3\xafve caf\xc3\xa9",
    "line one\nline two\t."};

template <typename T>
using Outcome = std::variant<T, ErrorCode>;

template <typename Fn>
auto outcome(Fn&& fn) -> Outcome<decltype(fn())> {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.retryable()) throw;  // a transport failure says nothing about the tokenizer
    return e.code();
  }
}

std::vector<TokenId> id_sample(std::size_t vocab_size) {
  constexpr std::size_t kMaxSample = 512;
  const std::size_t stride = std::max<std::size_t>(1, vocab_size / kMaxSample);
  std::vector<TokenId> ids;
  for (std::size_t i = 0; i < vocab_size; i += stride) ids.push_back(static_cast<TokenId>(i));
  if (ids.back() != static_cast<TokenId>(vocab_size - 1)) {
    ids.push_back(static_cast<TokenId>(vocab_size - 1));
  }
  return ids;
}

}  // namespace

std::span<const std::string_view> probe_strings() { return kProbes; }

ModelPair open_pair(ModelHandle base, ModelHandle finetuned) {
  if (!base || !finetuned) throw Error(ErrorCode::Precondition, "open_pair: null model handle");
  const ModelInfo bi = base->info();
  const ModelInfo fi = finetuned->info();
  if (bi.vocab_size != fi.vocab_size) {
    throw Error(ErrorCode::PairIncompatible,
                "vocab_size differs: base " + std::to_string(bi.vocab_size) + " vs finetuned " +
                    std::to_string(fi.vocab_size));
  }
  if (bi.eos_token != fi.eos_token) {
    throw Error(ErrorCode::PairIncompatible, "eos_token differs between base and finetuned");
  }
  for (std::string_view probe : kProbes) {
    auto a = outcome([&] { return base->tokenize(probe); });
    auto b = outcome([&] { return finetuned->tokenize(probe); });
    if (a != b) {
      throw Error(ErrorCode::PairIncompatible,
                  "tokenizers disagree on probe string \"" + std::string(probe) + "\"");
    }
  }
  const auto ids = id_sample(bi.vocab_size);
  auto a = outcome([&] { return base->detokenize(ids); });
  auto b = outcome([&] { return finetuned->detokenize(ids); });
  if (a != b) {
    throw Error(ErrorCode::PairIncompatible, "detokenizers disagree on the sampled id set");
  }
  ModelPair pair;
  pair.vocab_size = bi.vocab_size;
  pair.eos_token = bi.eos_token;
  pair.base_id = bi.model_id;
  pair.finetuned_id = fi.model_id;
  pair.base = std::move(base);
  pair.finetuned = std::move(finetuned);
  return pair;
}

ModelHandle open_model(std::string_view endpoint) {
  if (endpoint.rfind("toy:", 0) == 0) {
    return std::make_shared<ToyLM>(load_toy_spec(std::string(endpoint.substr(4))));
  }
  if (endpoint.rfind("http://", 0) == 0 || endpoint.rfind("https://", 0) == 0) {
    return std::make_shared<RemoteModel>(std::string(endpoint));
  }
  throw Error(ErrorCode::Usage, "unrecognized endpoint \"" + std::string(endpoint) +
                                    "\" (expected toy:<spec.json> or http(s)://...)");
}

ModelPair open_pair(std::string_view base_endpoint, std::string_view finetuned_endpoint) {
  ModelPair pair = open_pair(open_model(base_endpoint), open_model(finetuned_endpoint));
  pair.base_endpoint = base_endpoint;
  pair.finetuned_endpoint = finetuned_endpoint;
  return pair;
}

ModelPair open_toy_pair(const std::string& spec_path) {
  ToyLMSpec ft = load_toy_spec(spec_path);
  ToyLMSpec base = ft;
  base.implant.lambda = 0.0;
  ModelPair pair = open_pair(std::make_shared<ToyLM>(std::move(base)),
                             std::make_shared<ToyLM>(std::move(ft)));
  pair.base_endpoint = "toy-pair:" + spec_path + "#base";
  pair.finetuned_endpoint = "toy-pair:" + spec_path + "#finetuned";
  return pair;
}

}  // namespace cdd
