#pragma once

// Per-position logit arithmetic for contrastive decoding.
//
// Scores are formed from normalized log-probabilities:
//
//   score[i] = (1 + beta) * logp_ft[i] - beta * logp_base[i]
//
// and sampling is restricted to the plausible set
//
//   { i : p_ft[i] >= alpha * max_j p_ft[j] }
//
// where p_ft is the pre-temperature finetuned distribution. Temperature only
// divides the final masked scores. All arithmetic is double precision.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cdd/logit/rng.hpp"

namespace cdd {

using TokenId = std::int32_t;

class LogitVector {
 public:
  LogitVector() = default;
  explicit LogitVector(std::vector<double> values) : values_(std::move(values)) {}

  static LogitVector from_float32(std::span<const float> raw);

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  const double* data() const noexcept { return values_.data(); }

  bool all_finite() const noexcept;

  friend bool operator==(const LogitVector&, const LogitVector&) = default;

 private:
  std::vector<double> values_;
};

struct ContrastiveParams {
  double beta = 1.0;
  double alpha = 0.1;

  // Throws InvalidParameter unless beta >= 0 and alpha in [0, 1].
  void validate() const;
};

class PlausibilityMask {
 public:
  // Throws InvalidParameter when no token is allowed.
  explicit PlausibilityMask(std::vector<std::uint8_t> keep);

  static PlausibilityMask full(std::size_t vocab_size);
  static PlausibilityMask of(std::size_t vocab_size, std::span<const TokenId> ids);

  std::size_t vocab_size() const noexcept { return keep_.size(); }
  std::size_t count() const noexcept { return count_; }
  bool contains(TokenId id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < keep_.size() && keep_[id] != 0;
  }
  std::vector<TokenId> ids() const;
  const std::uint8_t* flags() const noexcept { return keep_.data(); }

  friend bool operator==(const PlausibilityMask&, const PlausibilityMask&) = default;

 private:
  std::vector<std::uint8_t> keep_;
  std::size_t count_ = 0;
};

// Normalizes raw logits. Throws MalformedLogits on empty or non-finite input.
LogitVector log_softmax(const LogitVector& raw);

// exp(log_softmax(raw)).
std::vector<double> softmax(const LogitVector& raw);

// Throws VocabMismatch on length mismatch, InvalidParameter on bad params.
LogitVector contrastive_score(const LogitVector& logp_ft,
                              const LogitVector& logp_base,
                              const ContrastiveParams& params);

// Keeps i iff p_ft[i] >= alpha * max(p_ft). Throws InvalidParameter when
// alpha is outside [0, 1] or p_ft is not a probability vector.
PlausibilityMask plausibility_mask(std::span<const double> p_ft, double alpha);

// softmax(scores / temperature) restricted to the mask and renormalized.
std::vector<double> masked_distribution(const LogitVector& scores,
                                        const PlausibilityMask& mask,
                                        double temperature);

// Draws one token from masked_distribution by inverse CDF in token-id order,
// consuming exactly one uniform from rng.
TokenId masked_sample(const LogitVector& scores, const PlausibilityMask& mask,
                      double temperature, Rng& rng);

// Masked argmax, ties to the lowest id.
TokenId greedy_pick(const LogitVector& scores, const PlausibilityMask& mask);

// Everything the decoder needs for one position.
struct ContrastiveStep {
  LogitVector logp_ft;
  LogitVector logp_base;
  LogitVector scores;
  PlausibilityMask mask;
};

ContrastiveStep contrast(const LogitVector& raw_ft, const LogitVector& raw_base,
                         const ContrastiveParams& params);

}  // namespace cdd
