#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "smm/json.hpp"

namespace smm {

enum class Role { User, Assistant };

struct ChatMessage {
  Role role = Role::User;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::string system_prompt;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_output_tokens = 2048;

  /// Throws ConfigError unless there is a system prompt, at least one user
  /// message, temperature >= 0 and a positive token cap.
  void validate() const;
};

enum class BackendKind { HttpApi, ScriptedReplay };

/// Request/response field names of a chat-completion HTTP API. The presets
/// cover OpenAI- and Anthropic-style endpoints; anything else is a matter of
/// filling the fields in from config.
struct WireFormat {
  std::string model_field = "model";
  std::string messages_field = "messages";
  /// Empty: the system prompt goes first in the message list with `system_role`.
  std::string system_field;
  std::string system_role = "system";
  std::string temperature_field = "temperature";
  std::string max_tokens_field = "max_tokens";
  /// JSON pointer to the reply text in the response body.
  std::string response_pointer = "/choices/0/message/content";
  std::string auth_header = "Authorization";
  std::string auth_prefix = "Bearer ";
  std::vector<std::pair<std::string, std::string>> extra_headers;

  static WireFormat openai();
  static WireFormat anthropic();
  /// "openai" or "anthropic"; throws ConfigError otherwise.
  static WireFormat preset(const std::string& name);
};

struct BackendConfig {
  BackendKind kind = BackendKind::ScriptedReplay;
  std::string endpoint;  // http_api only
  std::string model;
  std::string api_key_env;  // name of the variable, never the key itself
  double timeout_seconds = 60.0;
  int max_retries = 3;
  int requests_per_minute = 60;
  /// JSON-lines response cache; empty disables caching for http_api.
  std::string cache_path;
  double backoff_initial_seconds = 1.0;
  WireFormat wire;

  void validate() const;
};

/// Hex SHA-256 of the canonical form of (model, system prompt, messages,
/// temperature). The token cap is deliberately not part of the key.
std::string request_digest(const std::string& model, const ChatRequest& req);
std::string canonical_request(const std::string& model, const ChatRequest& req);

struct CacheEntry {
  std::string request_digest;
  std::string response_text;
  std::string created_at;  // ISO-8601 UTC

  friend bool operator==(const CacheEntry&, const CacheEntry&) = default;
};

/// Append-only JSON-lines response store. Lookups take a shared lock; stores
/// and removals are serialized. A later line for the same digest wins.
class ResponseCache {
 public:
  /// In-memory only (nothing is persisted).
  ResponseCache() = default;
  /// Loads `path` if it exists; new entries are appended to it.
  explicit ResponseCache(std::string path);

  /// One instance per path within the process, so concurrent backends that
  /// name the same file share its lock.
  static std::shared_ptr<ResponseCache> open_shared(const std::string& path);

  std::optional<std::string> lookup(const std::string& digest) const;
  void store(const std::string& digest, const std::string& response);
  /// Drops every line for `digest` and rewrites the file. Returns false if absent.
  bool remove(const std::string& digest);
  std::vector<CacheEntry> entries() const;
  std::size_t size() const;
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
  mutable std::shared_mutex mutex_;
  std::vector<CacheEntry> log_;
  std::unordered_map<std::string, std::size_t> latest_;
};

/// Spaces request starts at least 60/rpm seconds apart across all callers.
class RateLimiter {
 public:
  explicit RateLimiter(int requests_per_minute);
  void acquire();

 private:
  std::mutex mutex_;
  std::chrono::steady_clock::duration interval_;
  std::chrono::steady_clock::time_point next_;
};

struct BackendStats {
  std::size_t calls = 0;
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;
  std::size_t network_requests = 0;
  std::size_t retries = 0;
};

/// A chat-completion backend. Implementations accept concurrent `complete`.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const ChatRequest& req) = 0;
  virtual const std::string& model() const = 0;
  BackendStats stats() const;

 protected:
  struct Counters {
    std::atomic<std::size_t> calls{0};
    std::atomic<std::size_t> cache_hits{0};
    std::atomic<std::size_t> cache_misses{0};
    std::atomic<std::size_t> network_requests{0};
    std::atomic<std::size_t> retries{0};
  };
  mutable Counters counters_;
};

/// Serves responses from a cache only; an unrecorded request is CacheMiss.
class ReplayBackend final : public ChatBackend {
 public:
  ReplayBackend(std::string model, std::shared_ptr<ResponseCache> cache);
  std::string complete(const ChatRequest& req) override;
  const std::string& model() const override { return model_; }

 private:
  std::string model_;
  std::shared_ptr<ResponseCache> cache_;
};

/// Real HTTP chat API with cache-first lookup, rate cap, timeout, and
/// exponential-backoff retries of transient failures (transport errors,
/// timeouts, 429, 5xx).
class HttpBackend final : public ChatBackend {
 public:
  HttpBackend(BackendConfig cfg, std::shared_ptr<ResponseCache> cache);
  std::string complete(const ChatRequest& req) override;
  const std::string& model() const override { return cfg_.model; }

  /// Request body for `req` under this backend's wire format.
  Json build_body(const ChatRequest& req) const;

 private:
  std::string post_with_retries(const std::string& key, const std::string& body);

  BackendConfig cfg_;
  std::shared_ptr<ResponseCache> cache_;
  RateLimiter limiter_;
};

/// Answers from a callable; used to script fixtures and tests.
class ScriptedBackend final : public ChatBackend {
 public:
  using Responder = std::function<std::string(const ChatRequest&)>;
  ScriptedBackend(std::string model, Responder responder);
  /// Returns `responses` in order, then throws TransportError.
  static std::unique_ptr<ScriptedBackend> from_list(std::string model, std::vector<std::string> responses);

  std::string complete(const ChatRequest& req) override;
  const std::string& model() const override { return model_; }

 private:
  std::string model_;
  Responder responder_;
  std::mutex mutex_;
};

/// Writes every response of `inner` into `cache` under the request digest.
class RecordingBackend final : public ChatBackend {
 public:
  RecordingBackend(ChatBackend& inner, std::shared_ptr<ResponseCache> cache);
  std::string complete(const ChatRequest& req) override;
  const std::string& model() const override { return inner_.model(); }

 private:
  ChatBackend& inner_;
  std::shared_ptr<ResponseCache> cache_;
};

/// Backend for `cfg`. A null `cache` opens the shared cache at cfg.cache_path.
std::unique_ptr<ChatBackend> make_backend(const BackendConfig& cfg,
                                          std::shared_ptr<ResponseCache> cache = nullptr);

/// One-shot completion through a freshly built backend.
std::string complete(const BackendConfig& cfg, const ChatRequest& req);

}  // namespace smm
