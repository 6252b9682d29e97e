#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "smm/error.hpp"
#include "smm/llm_backend.hpp"

namespace smm {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

// Last transient failure; decides the thrown code once retries run out.
struct TransientFailure {
  Errc code = Errc::TransportError;
  std::string message;
};

}  // namespace

HttpBackend::HttpBackend(BackendConfig cfg, std::shared_ptr<ResponseCache> cache)
    : cfg_(std::move(cfg)), cache_(std::move(cache)), limiter_(cfg_.requests_per_minute) {
  cfg_.validate();
}

Json HttpBackend::build_body(const ChatRequest& req) const {
  const auto& w = cfg_.wire;
  Json body;
  body[w.model_field] = cfg_.model;
  Json messages = Json::array();
  if (w.system_field.empty()) {
    messages.push_back({{"role", w.system_role}, {"content", req.system_prompt}});
  } else {
    body[w.system_field] = req.system_prompt;
  }
  for (const auto& m : req.messages) {
    messages.push_back({{"role", m.role == Role::User ? "user" : "assistant"}, {"content", m.content}});
  }
  body[w.messages_field] = std::move(messages);
  if (!w.temperature_field.empty()) body[w.temperature_field] = req.temperature;
  if (!w.max_tokens_field.empty()) body[w.max_tokens_field] = req.max_output_tokens;
  return body;
}

std::string HttpBackend::complete(const ChatRequest& req) {
  req.validate();
  ++counters_.calls;
  std::string digest;
  if (cache_) {
    digest = request_digest(cfg_.model, req);
    if (auto hit = cache_->lookup(digest)) {
      ++counters_.cache_hits;
      return *hit;
    }
    ++counters_.cache_misses;
  }

  const char* key = std::getenv(cfg_.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw Error(Errc::AuthError, "environment variable " + cfg_.api_key_env + " is not set");
  }

  auto body = build_body(req).dump();
  auto response = post_with_retries(key, body);
  if (cache_) cache_->store(digest, response);
  return response;
}

std::string HttpBackend::post_with_retries(const std::string& key, const std::string& body) {
  auto ep = split_url(cfg_.endpoint);
  auto timeout = std::chrono::duration<double>(cfg_.timeout_seconds);
  auto timeout_us = std::chrono::duration_cast<std::chrono::microseconds>(timeout);

  TransientFailure last;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      ++counters_.retries;
      auto backoff = cfg_.backoff_initial_seconds * std::pow(2.0, attempt - 1);
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
    }
    limiter_.acquire();

    httplib::Client client(ep.origin);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout_us).count(),
                                  timeout_us.count() % 1000000);
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout_us).count(),
                            timeout_us.count() % 1000000);
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout_us).count(),
                             timeout_us.count() % 1000000);
    httplib::Headers headers;
    headers.emplace(cfg_.wire.auth_header, cfg_.wire.auth_prefix + key);
    for (const auto& [name, value] : cfg_.wire.extra_headers) headers.emplace(name, value);

    ++counters_.network_requests;
    auto started = std::chrono::steady_clock::now();
    auto res = client.Post(ep.path, headers, body, "application/json");
    auto elapsed = std::chrono::steady_clock::now() - started;

    if (!res) {
      auto err = res.error();
      bool timed_out = err == httplib::Error::ConnectionTimeout ||
                       (err == httplib::Error::Read && elapsed >= timeout * 0.9);
      last = {timed_out ? Errc::Timeout : Errc::TransportError, httplib::to_string(err)};
      continue;
    }
    auto status = res->status;
    if (status == 401 || status == 403) {
      throw Error(Errc::AuthError, "endpoint rejected credentials (HTTP " + std::to_string(status) + ")");
    }
    if (status == 429) {
      last = {Errc::RateLimited, "HTTP 429"};
      continue;
    }
    if (status >= 500) {
      last = {Errc::TransportError, "HTTP " + std::to_string(status)};
      continue;
    }
    if (status < 200 || status >= 300) {
      throw Error(Errc::TransportError, "HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200));
    }
    Json parsed;
    try {
      parsed = Json::parse(res->body);
    } catch (const Json::parse_error& e) {
      throw Error(Errc::TransportError, std::string("response body is not JSON: ") + e.what());
    }
    Json::json_pointer ptr(cfg_.wire.response_pointer);
    if (!parsed.contains(ptr) || !parsed[ptr].is_string()) {
      throw Error(Errc::SchemaError, "response has no string at " + cfg_.wire.response_pointer);
    }
    return parsed[ptr].get<std::string>();
  }
  throw Error(last.code, last.message + " after " + std::to_string(cfg_.max_retries + 1) + " attempts");
}

}  // namespace smm
