#include "cdd/decoder/decoder.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "cdd/error.hpp"
#include "cdd/logit/kernels.hpp"

namespace cdd {

void DecodeConfig::validate() const {
  contrastive().validate();
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::InvalidParameter, "temperature must be > 0");
  }
  if (max_new_tokens == 0) {
    throw Error(ErrorCode::InvalidParameter, "max_new_tokens must be >= 1");
  }
}

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::Eos: return "eos";
    case StopReason::Budget: return "budget";
    case StopReason::ProviderError: return "provider-error";
  }
  return "budget";
}

StopReason stop_reason_from_string(std::string_view s) {
  if (s == "eos") return StopReason::Eos;
  if (s == "budget") return StopReason::Budget;
  if (s == "provider-error") return StopReason::ProviderError;
  throw Error(ErrorCode::Schema, "unknown stop_reason: " + std::string(s));
}

GenerationRecord decode_one(const ModelPair& pair, std::string_view prefill_text,
                            const DecodeConfig& config, Rng& rng) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  GenerationRecord rec;
  rec.prefill_text = prefill_text;
  rec.config = config;
  rec.stop_reason = StopReason::Budget;

  try {
    rec.prefill_ids = pair.tokenize(prefill_text);
    auto base = pair.base->begin_session(rec.prefill_ids);
    auto ft = pair.finetuned->begin_session(rec.prefill_ids);
    LogitVector raw_base = base->logits();
    LogitVector raw_ft = ft->logits();
    const ContrastiveParams params = config.contrastive();

    for (std::size_t step = 0; step < config.max_new_tokens; ++step) {
      const ContrastiveStep cs = contrast(raw_ft, raw_base, params);
      const TokenId token = config.greedy
                                ? greedy_pick(cs.scores, cs.mask)
                                : masked_sample(cs.scores, cs.mask, config.temperature, rng);
      rec.generated_ids.push_back(token);
      if (config.keep_diagnostics) {
        const auto lp = cs.logp_ft.values();
        rec.per_step.push_back(StepDiagnostic{
            token, cs.logp_ft[token], cs.logp_base[token],
            *std::max_element(lp.begin(), lp.end()), cs.mask.count()});
      }
      if (config.stop_on_eos && pair.eos_token && token == *pair.eos_token) {
        rec.stop_reason = StopReason::Eos;
        break;
      }
      if (step + 1 == config.max_new_tokens) break;
      raw_ft = ft->step(token);
      raw_base = base->step(token);
    }

    std::vector<TokenId> text_ids = rec.generated_ids;
    if (rec.stop_reason == StopReason::Eos) text_ids.pop_back();
    rec.generated_text = pair.detokenize(text_ids);
    std::vector<TokenId> all = rec.prefill_ids;
    all.insert(all.end(), text_ids.begin(), text_ids.end());
    rec.full_text = pair.detokenize(all);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidParameter) throw;
    rec.stop_reason = StopReason::ProviderError;
    rec.error = std::string(to_string(e.code())) + ": " + e.what();
  } catch (const std::exception& e) {
    rec.stop_reason = StopReason::ProviderError;
    rec.error = e.what();
  }
  rec.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rec;
}

GenerationRecord decode_one(const ModelPair& pair, std::string_view prefill_text,
                            const DecodeConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  GenerationRecord rec = decode_one(pair, prefill_text, config, rng);
  rec.seed = seed;
  return rec;
}

std::vector<GenerationRecord> decode_batch(const ModelPair& pair, std::string_view prefill_text,
                                           std::size_t n, const DecodeConfig& config,
                                           std::uint64_t base_seed, std::size_t parallelism) {
  if (n == 0) throw Error(ErrorCode::InvalidParameter, "decode_batch needs n >= 1");
  config.validate();
  std::vector<GenerationRecord> out(n);
  auto run = [&](std::size_t i) {
    out[i] = decode_one(pair, prefill_text, config, stable_mix(base_seed, i));
    out[i].trial_index = i;
  };
  const std::size_t workers = std::clamp<std::size_t>(parallelism, 1, n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) run(i);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace cdd
