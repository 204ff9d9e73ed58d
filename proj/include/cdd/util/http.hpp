#pragma once

#include <chrono>
#include <map>
#include <string>

namespace cdd {

struct HttpResponse {
  int status = 0;
  std::string body;
  std::string content_type;
};

using HttpHeaders = std::multimap<std::string, std::string>;

// Thin blocking client over cpp-httplib. base_url may carry a path prefix
// ("https://host/v1"); request paths are appended to it. Safe to share
// across threads: each request opens its own connection.
class HttpClient {
 public:
  explicit HttpClient(std::string base_url,
                      std::chrono::milliseconds timeout = std::chrono::seconds(60));

  HttpResponse get(const std::string& path, const HttpHeaders& headers = {}) const;
  HttpResponse post(const std::string& path, const std::string& body,
                    const HttpHeaders& headers = {}) const;
  HttpResponse del(const std::string& path, const HttpHeaders& headers = {}) const;

  const std::string& base_url() const { return base_url_; }

 private:
  std::string base_url_;
  std::string origin_;  // scheme://host[:port]
  std::string prefix_;  // path prefix without trailing slash
  std::chrono::milliseconds timeout_;
};

}  // namespace cdd
