#pragma once

// JSON codecs for the logit provider wire protocol.
//
//   GET    /meta                 -> {"eos_token": int|null, "model_id": str, "vocab_size": int}
//   POST   /tokenize             {"text": str}            -> {"ids": [int]}
//   POST   /detokenize           {"ids": [int]}           -> {"text": str}
//   POST   /session              {"context_ids": [int]}   -> {"session_id": str}
//   POST   /session/{id}/step    {"token_id": int}        -> {"logits": L}
//   POST   /logits               {"context_ids": [int]}   -> {"logits": L}
//   DELETE /session/{id}                                  -> {}
//
// L is a base64 string of little-endian float32 values when the request's
// Accept header carries "logits=base64-f32le", otherwise a plain JSON array.
// Logits are raw (pre-softmax) and always full-vocabulary.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdd/provider/provider.hpp"
#include "cdd/util/json_io.hpp"

namespace cdd::wire {

inline constexpr std::string_view kAcceptBase64 =
    "application/json; logits=base64-f32le, application/json;q=0.5";
inline constexpr std::string_view kAcceptPlain = "application/json";

bool accepts_base64(std::string_view accept_header);

Json meta_to_json(const ModelInfo& info);
// Throws Schema on shape errors and Unsupported when the endpoint advertises
// a truncated (top-k) logit mode.
ModelInfo meta_from_json(const Json& j);

Json logits_to_json(std::span<const float> logits, bool base64);
// Throws Schema on shape errors or when the length differs from vocab_size,
// MalformedLogits when any entry is non-finite.
LogitVector logits_from_json(const Json& j, std::size_t vocab_size);

Json ids_to_json(std::span<const TokenId> ids);
std::vector<TokenId> ids_from_json(const Json& j);

}  // namespace cdd::wire
