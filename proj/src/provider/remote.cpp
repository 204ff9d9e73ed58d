#include "cdd/provider/remote.hpp"

#include <thread>

#include "cdd/error.hpp"
#include "cdd/provider/wire.hpp"

namespace cdd {

namespace {

HttpHeaders accept_headers(bool base64) {
  return {{"Accept", std::string(base64 ? wire::kAcceptBase64 : wire::kAcceptPlain)}};
}

class RemoteSession final : public DecodeSession {
 public:
  RemoteSession(const RemoteModel& model, std::span<const TokenId> context)
      : model_(model) {
    context_.assign(context.begin(), context.end());
    id_ = model_.create_session(context_);
    logits_ = model_.logits(context_);
  }

  ~RemoteSession() override {
    try {
      model_.delete_session(id_);
    } catch (...) {
    }
  }

  const LogitVector& step(TokenId token) override {
    try {
      logits_ = model_.step_session(id_, token);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SessionLost && !e.retryable()) throw;
      // Server lost or may have half-applied the step: rebuild from our own
      // context and replay the token once.
      id_ = model_.create_session(context_);
      logits_ = model_.step_session(id_, token);
    }
    context_.push_back(token);
    return logits_;
  }

 private:
  const RemoteModel& model_;
  std::string id_;
};

}  // namespace

RemoteModel::RemoteModel(std::string endpoint, RemoteOptions options)
    : http_(std::move(endpoint), options.timeout), options_(options) {
  info_ = wire::meta_from_json(call("GET", "/meta", nullptr));
}

Json RemoteModel::call(const char* method, const std::string& path, const Json* body) const {
  const std::string m(method);
  // Session steps are not idempotent; the session object handles recovery.
  const bool retry = path.find("/step") == std::string::npos;
  const int attempts = retry ? std::max(1, options_.max_attempts) : 1;
  auto delay = options_.backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      HttpResponse res;
      const auto headers = accept_headers(options_.base64_logits);
      if (m == "GET") {
        res = http_.get(path, headers);
      } else if (m == "DELETE") {
        res = http_.del(path, headers);
      } else {
        res = http_.post(path, body ? body->dump() : "{}", headers);
      }
      const std::string where = m + " " + http_.base_url() + path;
      if (res.status == 404 && path.rfind("/session/", 0) == 0) {
        throw Error(ErrorCode::SessionLost, where + ": unknown session");
      }
      if (res.status == 413) throw Error(ErrorCode::Budget, where + ": context too long");
      if (res.status >= 500) {
        throw Error(ErrorCode::Io, where + ": HTTP " + std::to_string(res.status));
      }
      if (res.status == 400) {
        throw Error(ErrorCode::InvalidInput, where + ": " + res.body);
      }
      if (res.status != 200) {
        throw Error(ErrorCode::Schema, where + ": unexpected HTTP " + std::to_string(res.status));
      }
      try {
        return Json::parse(res.body);
      } catch (const Json::exception& e) {
        throw Error(ErrorCode::Schema, where + ": body is not JSON: " + e.what());
      }
    } catch (const Error& e) {
      if (!e.retryable() || attempt >= attempts) throw;
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
}

std::vector<TokenId> RemoteModel::tokenize(std::string_view text) const {
  const Json body = {{"text", std::string(text)}};
  const Json res = call("POST", "/tokenize", &body);
  if (!res.contains("ids")) throw Error(ErrorCode::Schema, "/tokenize: missing ids");
  return wire::ids_from_json(res.at("ids"));
}

std::string RemoteModel::detokenize(std::span<const TokenId> ids) const {
  const Json body = {{"ids", wire::ids_to_json(ids)}};
  const Json res = call("POST", "/detokenize", &body);
  if (!res.contains("text") || !res.at("text").is_string()) {
    throw Error(ErrorCode::Schema, "/detokenize: missing text");
  }
  return res.at("text").get<std::string>();
}

LogitVector RemoteModel::logits(std::span<const TokenId> context) const {
  const Json body = {{"context_ids", wire::ids_to_json(context)}};
  return wire::logits_from_json(call("POST", "/logits", &body), info_.vocab_size);
}

std::string RemoteModel::create_session(std::span<const TokenId> context) const {
  const Json body = {{"context_ids", wire::ids_to_json(context)}};
  const Json res = call("POST", "/session", &body);
  if (!res.contains("session_id") || !res.at("session_id").is_string()) {
    throw Error(ErrorCode::Schema, "/session: missing session_id");
  }
  return res.at("session_id").get<std::string>();
}

LogitVector RemoteModel::step_session(const std::string& id, TokenId token) const {
  const Json body = {{"token_id", token}};
  return wire::logits_from_json(call("POST", "/session/" + id + "/step", &body),
                                info_.vocab_size);
}

void RemoteModel::delete_session(const std::string& id) const {
  call("DELETE", "/session/" + id, nullptr);
}

std::unique_ptr<DecodeSession> RemoteModel::begin_session(std::span<const TokenId> context) const {
  return std::make_unique<RemoteSession>(*this, context);
}

}  // namespace cdd
