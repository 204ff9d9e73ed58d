#pragma once

#include <chrono>
#include <string>

#include "cdd/provider/provider.hpp"
#include "cdd/util/http.hpp"
#include "cdd/util/json_io.hpp"

namespace cdd {

struct RemoteOptions {
  std::chrono::milliseconds timeout = std::chrono::seconds(120);
  int max_attempts = 3;
  std::chrono::milliseconds backoff = std::chrono::milliseconds(50);
  bool base64_logits = true;
};

// Client for a remote logit provider. Never fabricates logits: transport,
// status and schema failures surface as errors. Sessions that the server
// no longer knows are rebuilt from the client-side context.
class RemoteModel final : public LanguageModel {
 public:
  // Fetches /meta; throws Connection naming the endpoint when unreachable.
  explicit RemoteModel(std::string endpoint, RemoteOptions options = {});

  ModelInfo info() const override { return info_; }
  std::vector<TokenId> tokenize(std::string_view text) const override;
  std::string detokenize(std::span<const TokenId> ids) const override;
  LogitVector logits(std::span<const TokenId> context) const override;
  std::unique_ptr<DecodeSession> begin_session(
      std::span<const TokenId> context) const override;

  const std::string& endpoint() const { return http_.base_url(); }

  // Creates a server-side session; exposed for the session class.
  std::string create_session(std::span<const TokenId> context) const;
  LogitVector step_session(const std::string& id, TokenId token) const;
  void delete_session(const std::string& id) const;

 private:
  Json call(const char* method, const std::string& path, const Json* body) const;

  HttpClient http_;
  RemoteOptions options_;
  ModelInfo info_;
};

}  // namespace cdd
