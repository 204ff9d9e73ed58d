#include "cdd/util/http.hpp"

#include <httplib.h>

#include "cdd/error.hpp"

namespace cdd {

namespace {

httplib::Headers to_httplib(const HttpHeaders& headers) {
  return httplib::Headers(headers.begin(), headers.end());
}

HttpResponse convert(const httplib::Result& res, const std::string& method,
                     const std::string& url) {
  if (!res) {
    throw Error(ErrorCode::Connection,
                method + " " + url + ": " + httplib::to_string(res.error()));
  }
  HttpResponse out;
  out.status = res->status;
  out.body = res->body;
  out.content_type = res->get_header_value("Content-Type");
  return out;
}

}  // namespace

HttpClient::HttpClient(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {
  const auto scheme_end = base_url_.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::Usage, "endpoint is not an http(s) URL: " + base_url_);
  }
  const auto path_start = base_url_.find('/', scheme_end + 3);
  origin_ = base_url_.substr(0, path_start);
  if (path_start != std::string::npos) {
    prefix_ = base_url_.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }
}

HttpResponse HttpClient::get(const std::string& path, const HttpHeaders& headers) const {
  httplib::Client cli(origin_);
  cli.set_connection_timeout(timeout_);
  cli.set_read_timeout(timeout_);
  return convert(cli.Get(prefix_ + path, to_httplib(headers)), "GET", base_url_ + path);
}

HttpResponse HttpClient::post(const std::string& path, const std::string& body,
                              const HttpHeaders& headers) const {
  httplib::Client cli(origin_);
  cli.set_connection_timeout(timeout_);
  cli.set_read_timeout(timeout_);
  return convert(cli.Post(prefix_ + path, to_httplib(headers), body, "application/json"),
                 "POST", base_url_ + path);
}

HttpResponse HttpClient::del(const std::string& path, const HttpHeaders& headers) const {
  httplib::Client cli(origin_);
  cli.set_connection_timeout(timeout_);
  cli.set_read_timeout(timeout_);
  return convert(cli.Delete(prefix_ + path, to_httplib(headers)), "DELETE", base_url_ + path);
}

}  // namespace cdd
