#pragma once

// Client for chat-completion style HTTP APIs (POST {base_url}/chat/completions).

#include <chrono>
#include <mutex>
#include <string>
#include <vector>

#include "cdd/util/http.hpp"
#include "cdd/util/json_io.hpp"

namespace cdd {

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatConfig {
  std::string base_url;
  std::string model;
  // Name of the environment variable holding the bearer token. Credentials
  // are never taken from flags or files.
  std::string api_key_env = "CDD_JUDGE_API_KEY";
  double temperature = 0.0;
  int max_tokens = 2048;
  std::chrono::milliseconds timeout = std::chrono::seconds(300);
  int max_attempts = 4;
  std::chrono::milliseconds backoff = std::chrono::milliseconds(500);
  double max_requests_per_minute = 0.0;  // 0: unlimited

  Json to_json() const;  // never includes the credential
};

struct ChatExchange {
  Json request;
  Json response;  // null when every attempt failed
  std::string content;
  std::string finish_reason;
  bool truncated = false;
  int attempts = 0;

  Json to_json() const;
};

class ChatClient {
 public:
  explicit ChatClient(ChatConfig config);

  const ChatConfig& config() const { return config_; }

  // Retries connection failures, 429 and 5xx with exponential backoff, then
  // throws. Each call is an independent conversation.
  ChatExchange complete(const std::vector<ChatMessage>& messages) const;

 private:
  void throttle() const;

  ChatConfig config_;
  HttpClient http_;
  mutable std::mutex rate_mu_;
  mutable std::chrono::steady_clock::time_point next_slot_{};
};

}  // namespace cdd
