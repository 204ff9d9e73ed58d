#pragma once

// Deterministic word-level n-gram language models for desk-scale runs.
//
// Corpus model:  P(w | h) = (c(h, w) + k) / (c(h) + k * V)
// Implant model: same form over the implant sequences with its own k.
// Finetuned:     (1 - lambda) * corpus + lambda * implant
//
// h is the last (order - 1) tokens, left-padded with a begin-of-sequence
// marker; every document is terminated by <eos> when eos is enabled.
// Raw logits are natural-log probabilities.

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "cdd/provider/provider.hpp"

namespace cdd {

struct ToyImplant {
  std::vector<std::string> sequences;
  double lambda = 0.05;
  double smoothing = 1e-6;
};

struct ToyLMSpec {
  std::string name = "toy";
  int order = 2;
  double smoothing = 0.01;
  bool eos = true;
  std::vector<std::string> corpus;
  std::vector<std::string> extra_vocab;
  ToyImplant implant;
  std::size_t max_context = 4096;

  void validate() const;
};

// Reads a JSON spec. "corpus_file" is resolved relative to the spec file.
ToyLMSpec load_toy_spec(const std::string& path);

class ToyLM final : public LanguageModel {
 public:
  explicit ToyLM(ToyLMSpec spec);

  ModelInfo info() const override;
  std::vector<TokenId> tokenize(std::string_view text) const override;
  std::string detokenize(std::span<const TokenId> ids) const override;
  LogitVector logits(std::span<const TokenId> context) const override;
  std::unique_ptr<DecodeSession> begin_session(
      std::span<const TokenId> context) const override;

  // Next-token probabilities for a full context.
  std::vector<double> next_distribution(std::span<const TokenId> context) const;

  const ToyLMSpec& spec() const { return spec_; }
  const std::vector<std::string>& vocabulary() const { return words_; }
  TokenId id_of(std::string_view word) const;

 private:
  using History = std::vector<TokenId>;

  struct CountTable {
    std::map<History, std::vector<std::uint32_t>> rows;
    std::map<History, std::uint64_t> totals;
  };

  CountTable count(const std::vector<std::string>& docs) const;
  History history_of(std::span<const TokenId> context) const;
  void fill_row(const CountTable& table, const History& h, double k, double weight,
                std::vector<double>& out) const;

  ToyLMSpec spec_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> ids_;
  CountTable corpus_;
  CountTable implant_;
};

// Convenience wrapper: builds the model and evaluates one context.
std::vector<double> toy_next_distribution(const ToyLMSpec& spec,
                                          std::span<const TokenId> context);

}  // namespace cdd
