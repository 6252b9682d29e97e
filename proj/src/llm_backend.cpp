#include "smm/llm_backend.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <ctime>
#include <deque>
#include <filesystem>
#include <fstream>
#include <thread>

#include "smm/error.hpp"

namespace smm {

void ChatRequest::validate() const {
  if (system_prompt.empty()) throw Error(Errc::ConfigError, "chat request needs a system prompt");
  bool has_user = false;
  for (const auto& m : messages) has_user = has_user || m.role == Role::User;
  if (!has_user) throw Error(Errc::ConfigError, "chat request needs at least one user message");
  if (!(temperature >= 0.0)) throw Error(Errc::ConfigError, "temperature must be >= 0");
  if (max_output_tokens <= 0) throw Error(Errc::ConfigError, "max_output_tokens must be positive");
}

WireFormat WireFormat::openai() { return WireFormat{}; }

WireFormat WireFormat::anthropic() {
  WireFormat w;
  w.system_field = "system";
  w.response_pointer = "/content/0/text";
  w.auth_header = "x-api-key";
  w.auth_prefix = "";
  w.extra_headers = {{"anthropic-version", "2023-06-01"}};
  return w;
}

WireFormat WireFormat::preset(const std::string& name) {
  if (name == "openai") return openai();
  if (name == "anthropic") return anthropic();
  throw Error(Errc::ConfigError, "unknown wire format preset '" + name + "'");
}

void BackendConfig::validate() const {
  if (model.empty()) throw Error(Errc::ConfigError, "backend model name is empty");
  if (max_retries < 0) throw Error(Errc::ConfigError, "max_retries must be >= 0");
  if (requests_per_minute <= 0) throw Error(Errc::ConfigError, "requests_per_minute must be positive");
  if (!(timeout_seconds > 0)) throw Error(Errc::ConfigError, "timeout must be positive");
  if (kind == BackendKind::HttpApi) {
    if (endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0) {
      throw Error(Errc::ConfigError, "http_api endpoint must be an http(s) URL");
    }
    if (api_key_env.empty()) throw Error(Errc::ConfigError, "http_api needs api_key_env");
  }
}

std::string canonical_request(const std::string& model, const ChatRequest& req) {
  // nlohmann::json (not ordered_json) sorts keys, which makes the dump canonical.
  nlohmann::json j;
  j["model"] = model;
  j["system"] = req.system_prompt;
  j["temperature"] = req.temperature;
  j["messages"] = nlohmann::json::array();
  for (const auto& m : req.messages) {
    j["messages"].push_back({{"role", m.role == Role::User ? "user" : "assistant"}, {"content", m.content}});
  }
  return j.dump();
}

std::string request_digest(const std::string& model, const ChatRequest& req) {
  auto text = canonical_request(model, req);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::IOError, "SHA-256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

// ---- ResponseCache ----

namespace {

std::string utc_now() {
  auto t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string entry_line(const CacheEntry& e) {
  Json j;
  j["request_digest"] = e.request_digest;
  j["response_text"] = e.response_text;
  j["created_at"] = e.created_at;
  return j.dump();
}

}  // namespace

ResponseCache::ResponseCache(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = Json::parse(line);
      CacheEntry e{j.at("request_digest").get<std::string>(), j.at("response_text").get<std::string>(),
                   j.value("created_at", std::string())};
      latest_[e.request_digest] = log_.size();
      log_.push_back(std::move(e));
    } catch (const Json::exception& ex) {
      throw Error(Errc::ParseError, path_ + " line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
}

std::shared_ptr<ResponseCache> ResponseCache::open_shared(const std::string& path) {
  static std::mutex registry_mutex;
  static std::unordered_map<std::string, std::weak_ptr<ResponseCache>> registry;
  std::lock_guard lock(registry_mutex);
  auto key = std::filesystem::weakly_canonical(path).string();
  if (auto existing = registry[key].lock()) return existing;
  auto cache = std::make_shared<ResponseCache>(path);
  registry[key] = cache;
  return cache;
}

std::optional<std::string> ResponseCache::lookup(const std::string& digest) const {
  std::shared_lock lock(mutex_);
  auto it = latest_.find(digest);
  if (it == latest_.end()) return std::nullopt;
  return log_[it->second].response_text;
}

void ResponseCache::store(const std::string& digest, const std::string& response) {
  std::unique_lock lock(mutex_);
  CacheEntry e{digest, response, utc_now()};
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error(Errc::IOError, "cannot append to cache '" + path_ + "'");
    out << entry_line(e) << '\n';
  }
  latest_[digest] = log_.size();
  log_.push_back(std::move(e));
}

bool ResponseCache::remove(const std::string& digest) {
  std::unique_lock lock(mutex_);
  if (!latest_.count(digest)) return false;
  std::erase_if(log_, [&](const CacheEntry& e) { return e.request_digest == digest; });
  latest_.clear();
  for (std::size_t i = 0; i < log_.size(); ++i) latest_[log_[i].request_digest] = i;
  if (!path_.empty()) {
    auto tmp = path_ + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) throw Error(Errc::IOError, "cannot rewrite cache '" + path_ + "'");
      for (const auto& e : log_) out << entry_line(e) << '\n';
    }
    std::filesystem::rename(tmp, path_);
  }
  return true;
}

std::vector<CacheEntry> ResponseCache::entries() const {
  std::shared_lock lock(mutex_);
  return log_;
}

std::size_t ResponseCache::size() const {
  std::shared_lock lock(mutex_);
  return latest_.size();
}

// ---- RateLimiter ----

RateLimiter::RateLimiter(int requests_per_minute) {
  if (requests_per_minute <= 0) throw Error(Errc::ConfigError, "requests_per_minute must be positive");
  interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(60.0 / requests_per_minute));
  next_ = std::chrono::steady_clock::now();
}

void RateLimiter::acquire() {
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_);
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

// ---- backends ----

BackendStats ChatBackend::stats() const {
  return {counters_.calls.load(), counters_.cache_hits.load(), counters_.cache_misses.load(),
          counters_.network_requests.load(), counters_.retries.load()};
}

ReplayBackend::ReplayBackend(std::string model, std::shared_ptr<ResponseCache> cache)
    : model_(std::move(model)), cache_(std::move(cache)) {
  if (!cache_) throw Error(Errc::ConfigError, "replay backend needs a cache");
}

std::string ReplayBackend::complete(const ChatRequest& req) {
  req.validate();
  ++counters_.calls;
  auto digest = request_digest(model_, req);
  if (auto hit = cache_->lookup(digest)) {
    ++counters_.cache_hits;
    return *hit;
  }
  ++counters_.cache_misses;
  throw Error(Errc::CacheMiss, "no recorded response for digest " + digest + " (model " + model_ + ")");
}

ScriptedBackend::ScriptedBackend(std::string model, Responder responder)
    : model_(std::move(model)), responder_(std::move(responder)) {}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_list(std::string model,
                                                            std::vector<std::string> responses) {
  auto queue = std::make_shared<std::deque<std::string>>(responses.begin(), responses.end());
  return std::make_unique<ScriptedBackend>(std::move(model), [queue](const ChatRequest&) {
    if (queue->empty()) throw Error(Errc::TransportError, "scripted backend exhausted");
    auto r = std::move(queue->front());
    queue->pop_front();
    return r;
  });
}

std::string ScriptedBackend::complete(const ChatRequest& req) {
  req.validate();
  ++counters_.calls;
  std::lock_guard lock(mutex_);
  return responder_(req);
}

RecordingBackend::RecordingBackend(ChatBackend& inner, std::shared_ptr<ResponseCache> cache)
    : inner_(inner), cache_(std::move(cache)) {}

std::string RecordingBackend::complete(const ChatRequest& req) {
  ++counters_.calls;
  auto response = inner_.complete(req);
  cache_->store(request_digest(inner_.model(), req), response);
  return response;
}

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& cfg, std::shared_ptr<ResponseCache> cache) {
  cfg.validate();
  if (!cache && !cfg.cache_path.empty()) cache = ResponseCache::open_shared(cfg.cache_path);
  if (cfg.kind == BackendKind::ScriptedReplay) {
    if (!cache) throw Error(Errc::ConfigError, "scripted_replay backend needs a cache path");
    return std::make_unique<ReplayBackend>(cfg.model, std::move(cache));
  }
  return std::make_unique<HttpBackend>(cfg, std::move(cache));
}

std::string complete(const BackendConfig& cfg, const ChatRequest& req) {
  return make_backend(cfg)->complete(req);
}

}  // namespace smm
