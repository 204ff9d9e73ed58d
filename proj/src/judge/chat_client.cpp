#include "cdd/judge/chat_client.hpp"

#include <cstdlib>
#include <thread>

#include "cdd/error.hpp"

namespace cdd {

Json ChatConfig::to_json() const {
  return Json{{"base_url", base_url},
              {"model", model},
              {"api_key_env", api_key_env},
              {"temperature", temperature},
              {"max_tokens", max_tokens},
              {"timeout_ms", timeout.count()},
              {"max_attempts", max_attempts},
              {"max_requests_per_minute", max_requests_per_minute}};
}

Json ChatExchange::to_json() const {
  return Json{{"request", request},
              {"response", response},
              {"content", content},
              {"finish_reason", finish_reason},
              {"truncated", truncated},
              {"attempts", attempts}};
}

ChatClient::ChatClient(ChatConfig config)
    : config_(std::move(config)), http_(config_.base_url, config_.timeout) {
  if (config_.model.empty()) throw Error(ErrorCode::Usage, "chat endpoint needs a model name");
  if (config_.max_attempts < 1) throw Error(ErrorCode::InvalidParameter, "max_attempts must be >= 1");
}

void ChatClient::throttle() const {
  if (config_.max_requests_per_minute <= 0.0) return;
  const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(60.0 / config_.max_requests_per_minute));
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(rate_mu_);
    slot = std::max(std::chrono::steady_clock::now(), next_slot_);
    next_slot_ = slot + interval;
  }
  std::this_thread::sleep_until(slot);
}

ChatExchange ChatClient::complete(const std::vector<ChatMessage>& messages) const {
  ChatExchange ex;
  Json msgs = Json::array();
  for (const auto& m : messages) msgs.push_back(Json{{"role", m.role}, {"content", m.content}});
  ex.request = Json{{"model", config_.model},
                    {"messages", std::move(msgs)},
                    {"temperature", config_.temperature},
                    {"max_tokens", config_.max_tokens}};

  HttpHeaders headers{{"Accept", "application/json"}};
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string body = ex.request.dump();

  std::string last_error;
  auto delay = config_.backoff;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    ex.attempts = attempt;
    throttle();
    HttpResponse res;
    try {
      res = http_.post("/chat/completions", body, headers);
    } catch (const Error& e) {
      if (!e.retryable()) throw;
      last_error = e.what();
      continue;
    }
    if (res.status == 429 || res.status >= 500) {
      last_error = "HTTP " + std::to_string(res.status);
      continue;
    }
    if (res.status != 200) {
      throw Error(ErrorCode::Schema, "chat endpoint returned HTTP " + std::to_string(res.status) +
                                         ": " + res.body.substr(0, 200));
    }
    ex.response = Json::parse(res.body, nullptr, false);
    if (ex.response.is_discarded()) throw Error(ErrorCode::Schema, "chat endpoint returned non-JSON body");
    try {
      const Json& choice = ex.response.at("choices").at(0);
      const Json& content = choice.at("message").at("content");
      ex.content = content.is_null() ? std::string() : content.get<std::string>();
      ex.finish_reason = choice.value("finish_reason", std::string());
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::Schema, std::string("chat response: ") + e.what());
    }
    ex.truncated = ex.finish_reason == "length";
    return ex;
  }
  throw Error(ErrorCode::Connection, "chat endpoint " + config_.base_url + " failed after " +
                                         std::to_string(config_.max_attempts) + " attempts: " + last_error);
}

}  // namespace cdd
