#include "cdd/logit/logit_core.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cdd/error.hpp"
#include "cdd/logit/kernels.hpp"

namespace cdd {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::VocabMismatch,
                std::string(what) + ": length " + std::to_string(a) +
                    " vs " + std::to_string(b));
  }
}

void require_temperature(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::InvalidParameter,
                "temperature must be a positive finite number");
  }
}

}  // namespace

LogitVector LogitVector::from_float32(std::span<const float> raw) {
  std::vector<double> v(raw.begin(), raw.end());
  return LogitVector(std::move(v));
}

bool LogitVector::all_finite() const noexcept {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void ContrastiveParams::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorCode::InvalidParameter, "beta must be finite and >= 0");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCode::InvalidParameter, "alpha must lie in [0, 1]");
  }
}

PlausibilityMask::PlausibilityMask(std::vector<std::uint8_t> keep)
    : keep_(std::move(keep)) {
  for (auto& k : keep_) {
    k = k ? 1 : 0;
    count_ += k;
  }
  if (count_ == 0) {
    throw Error(ErrorCode::InvalidParameter, "plausibility mask is empty");
  }
}

PlausibilityMask PlausibilityMask::full(std::size_t vocab_size) {
  return PlausibilityMask(std::vector<std::uint8_t>(vocab_size, 1));
}

PlausibilityMask PlausibilityMask::of(std::size_t vocab_size,
                                      std::span<const TokenId> ids) {
  std::vector<std::uint8_t> keep(vocab_size, 0);
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
      throw Error(ErrorCode::InvalidParameter,
                  "mask token id " + std::to_string(id) + " out of range");
    }
    keep[id] = 1;
  }
  return PlausibilityMask(std::move(keep));
}

std::vector<TokenId> PlausibilityMask::ids() const {
  std::vector<TokenId> out;
  out.reserve(count_);
  for (std::size_t i = 0; i < keep_.size(); ++i) {
    if (keep_[i]) out.push_back(static_cast<TokenId>(i));
  }
  return out;
}

LogitVector log_softmax(const LogitVector& raw) {
  if (raw.empty()) throw Error(ErrorCode::MalformedLogits, "empty logit vector");
  if (!raw.all_finite()) {
    throw Error(ErrorCode::MalformedLogits, "logit vector has non-finite entries");
  }
  const auto& k = logit::kernels::active();
  const std::size_t n = raw.size();
  const double m = k.max_value(raw.data(), n);
  const double lse = m + std::log(k.shifted_exp_sum(raw.data(), n, m));
  std::vector<double> out(n);
  k.subtract(raw.data(), n, lse, out.data());
  return LogitVector(std::move(out));
}

std::vector<double> softmax(const LogitVector& raw) {
  const LogitVector lp = log_softmax(raw);
  std::vector<double> p(lp.size());
  logit::kernels::active().exp_shift(lp.data(), lp.size(), 0.0, p.data());
  return p;
}

LogitVector contrastive_score(const LogitVector& logp_ft,
                              const LogitVector& logp_base,
                              const ContrastiveParams& params) {
  params.validate();
  require_same_size(logp_ft.size(), logp_base.size(), "contrastive_score");
  std::vector<double> out(logp_ft.size());
  logit::kernels::active().contrastive(logp_ft.data(), logp_base.data(),
                                       out.size(), params.beta, out.data());
  return LogitVector(std::move(out));
}

PlausibilityMask plausibility_mask(std::span<const double> p_ft, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCode::InvalidParameter, "alpha must lie in [0, 1]");
  }
  if (p_ft.empty()) {
    throw Error(ErrorCode::InvalidParameter, "empty probability vector");
  }
  double total = 0.0;
  for (double p : p_ft) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error(ErrorCode::InvalidParameter,
                  "probability vector has negative or non-finite entries");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw Error(ErrorCode::InvalidParameter,
                "probability vector does not sum to 1");
  }
  const auto& k = logit::kernels::active();
  const double threshold = alpha * k.max_value(p_ft.data(), p_ft.size());
  std::vector<std::uint8_t> keep(p_ft.size());
  k.threshold_mask(p_ft.data(), p_ft.size(), threshold, keep.data());
  return PlausibilityMask(std::move(keep));
}

namespace {

// Masked, temperature-scaled scores plus their (shifted) exponentials.
struct MaskedWeights {
  std::vector<double> weights;
  double total = 0.0;
};

MaskedWeights masked_weights(const LogitVector& scores,
                             const PlausibilityMask& mask, double temperature) {
  require_temperature(temperature);
  require_same_size(scores.size(), mask.vocab_size(), "masked scores");
  const auto& k = logit::kernels::active();
  const std::size_t n = scores.size();
  std::vector<double> z(n);
  k.mask_scale(scores.data(), mask.flags(), n, temperature, z.data());
  const double m = k.max_value(z.data(), n);
  if (m == kNegInf || std::isnan(m)) {
    throw Error(ErrorCode::DegenerateDistribution,
                "every allowed token has score -inf");
  }
  MaskedWeights out;
  out.total = k.shifted_exp_sum(z.data(), n, m);
  out.weights.resize(n);
  k.exp_shift(z.data(), n, m, out.weights.data());
  return out;
}

}  // namespace

std::vector<double> masked_distribution(const LogitVector& scores,
                                        const PlausibilityMask& mask,
                                        double temperature) {
  MaskedWeights mw = masked_weights(scores, mask, temperature);
  for (double& w : mw.weights) w /= mw.total;
  return std::move(mw.weights);
}

TokenId masked_sample(const LogitVector& scores, const PlausibilityMask& mask,
                      double temperature, Rng& rng) {
  const MaskedWeights mw = masked_weights(scores, mask, temperature);
  const double target = rng.uniform() * mw.total;
  double cumulative = 0.0;
  TokenId last = -1;
  for (std::size_t i = 0; i < mw.weights.size(); ++i) {
    if (mw.weights[i] <= 0.0) continue;
    cumulative += mw.weights[i];
    last = static_cast<TokenId>(i);
    if (target < cumulative) return last;
  }
  // Rounding can leave target just above the running sum.
  return last;
}

TokenId greedy_pick(const LogitVector& scores, const PlausibilityMask& mask) {
  require_same_size(scores.size(), mask.vocab_size(), "greedy scores");
  TokenId best = -1;
  double best_score = kNegInf;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!mask.contains(static_cast<TokenId>(i))) continue;
    if (scores[i] > best_score) {
      best_score = scores[i];
      best = static_cast<TokenId>(i);
    }
  }
  if (best < 0) {
    throw Error(ErrorCode::DegenerateDistribution,
                "every allowed token has score -inf");
  }
  return best;
}

ContrastiveStep contrast(const LogitVector& raw_ft, const LogitVector& raw_base,
                         const ContrastiveParams& params) {
  params.validate();
  require_same_size(raw_ft.size(), raw_base.size(), "model pair logits");
  LogitVector logp_ft = log_softmax(raw_ft);
  LogitVector logp_base = log_softmax(raw_base);
  LogitVector scores = contrastive_score(logp_ft, logp_base, params);
  std::vector<double> p_ft(logp_ft.size());
  logit::kernels::active().exp_shift(logp_ft.data(), p_ft.size(), 0.0, p_ft.data());
  PlausibilityMask mask = plausibility_mask(p_ft, params.alpha);
  return ContrastiveStep{std::move(logp_ft), std::move(logp_base),
                         std::move(scores), std::move(mask)};
}

}  // namespace cdd
