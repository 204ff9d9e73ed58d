#pragma once

// Lockstep contrastive decoding over a model pair.
//
// Both models are prefilled with the same raw token sequence (no chat
// template), then advanced token by token: per step both logit vectors are
// normalized, combined, masked, and one token is drawn and fed to both.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdd/logit/logit_core.hpp"
#include "cdd/provider/provider.hpp"
#include "cdd/util/json_io.hpp"

namespace cdd {

struct DecodeConfig {
  double beta = 1.0;
  double alpha = 0.1;
  double temperature = 1.0;
  std::size_t max_new_tokens = 300;
  std::uint64_t seed = 0;
  bool stop_on_eos = true;
  // Masked argmax instead of sampling. Test and debugging aid.
  bool greedy = false;
  bool keep_diagnostics = true;

  ContrastiveParams contrastive() const { return {beta, alpha}; }
  void validate() const;

  Json to_json() const;
  static DecodeConfig from_json(const Json& j);

  friend bool operator==(const DecodeConfig&, const DecodeConfig&) = default;
};

enum class StopReason { Eos, Budget, ProviderError };

std::string_view to_string(StopReason reason);
StopReason stop_reason_from_string(std::string_view s);

struct StepDiagnostic {
  TokenId token = 0;
  double ft_logprob = 0.0;
  double base_logprob = 0.0;
  double ft_max_logprob = 0.0;
  std::size_t mask_size = 0;

  friend bool operator==(const StepDiagnostic&, const StepDiagnostic&) = default;
};

struct GenerationRecord {
  static constexpr int kSchemaVersion = 1;

  std::size_t prefill_index = 0;
  std::size_t trial_index = 0;
  std::string prefill_text;
  std::vector<TokenId> prefill_ids;
  std::vector<TokenId> generated_ids;
  std::string generated_text;  // continuation only, trailing EOS dropped
  std::string full_text;       // prefill + continuation
  StopReason stop_reason = StopReason::Budget;
  std::string error;           // set when stop_reason is ProviderError
  std::vector<StepDiagnostic> per_step;
  DecodeConfig config;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;

  bool failed() const { return stop_reason == StopReason::ProviderError; }

  Json to_json() const;
  static GenerationRecord from_json(const Json& j);
};

GenerationRecord decode_one(const ModelPair& pair, std::string_view prefill_text,
                            const DecodeConfig& config, Rng& rng);

// Seeds a fresh Rng and records the seed.
GenerationRecord decode_one(const ModelPair& pair, std::string_view prefill_text,
                            const DecodeConfig& config, std::uint64_t seed);

// n independent trials; trial i uses seed stable_mix(base_seed, i). Results
// are ordered by trial index regardless of scheduling.
std::vector<GenerationRecord> decode_batch(const ModelPair& pair, std::string_view prefill_text,
                                           std::size_t n, const DecodeConfig& config,
                                           std::uint64_t base_seed, std::size_t parallelism = 1);

}  // namespace cdd
