#pragma once

// Grey-box access to a (base, finetuned) model pair: tokenization plus
// full-vocabulary raw logits, with incremental sessions.

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdd/logit/logit_core.hpp"

namespace cdd {

struct ModelInfo {
  std::size_t vocab_size = 0;
  std::optional<TokenId> eos_token;
  std::string model_id;
};

// One incremental decoding stream. Confined to one logical generation at a
// time; distinct sessions may run concurrently.
class DecodeSession {
 public:
  virtual ~DecodeSession() = default;

  const std::vector<TokenId>& context() const { return context_; }

  // Raw logits for the position after the current context.
  const LogitVector& logits() const { return logits_; }

  // Appends one token and returns the logits for the following position.
  virtual const LogitVector& step(TokenId token) = 0;

 protected:
  std::vector<TokenId> context_;
  LogitVector logits_;
};

// One side of a pair. Implementations must be safe to share across threads.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual ModelInfo info() const = 0;
  virtual std::vector<TokenId> tokenize(std::string_view text) const = 0;
  virtual std::string detokenize(std::span<const TokenId> ids) const = 0;

  // Stateless full-context evaluation.
  virtual LogitVector logits(std::span<const TokenId> context) const = 0;

  // Prefills the context in one call. Throws Budget when it is too long.
  virtual std::unique_ptr<DecodeSession> begin_session(
      std::span<const TokenId> context) const = 0;
};

using ModelHandle = std::shared_ptr<const LanguageModel>;

class ModelPair {
 public:
  ModelHandle base;
  ModelHandle finetuned;
  std::size_t vocab_size = 0;
  std::optional<TokenId> eos_token;
  std::string base_id;
  std::string finetuned_id;
  // Endpoint strings the pair was opened from, when known.
  std::string base_endpoint;
  std::string finetuned_endpoint;

  std::vector<TokenId> tokenize(std::string_view text) const {
    return finetuned->tokenize(text);
  }
  std::string detokenize(std::span<const TokenId> ids) const {
    return finetuned->detokenize(ids);
  }
};

// Strings both tokenizers must agree on.
std::span<const std::string_view> probe_strings();

// Verifies vocabulary size, EOS id, tokenization of the probe strings and
// detokenization of a stride sample of ids. Throws PairIncompatible.
ModelPair open_pair(ModelHandle base, ModelHandle finetuned);

// Resolves one endpoint string: "toy:<spec.json>" or "http(s)://host:port".
ModelHandle open_model(std::string_view endpoint);

// Opens a pair from two endpoint strings.
ModelPair open_pair(std::string_view base_endpoint, std::string_view finetuned_endpoint);

// Opens a toy pair from one spec: the finetuned side is the spec as written,
// the base side is the same spec with implant weight 0.
ModelPair open_toy_pair(const std::string& spec_path);

}  // namespace cdd
