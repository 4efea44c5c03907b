#include "cforge/provider.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "cforge/error.hpp"

namespace cforge {

namespace {

void AppendField(std::string& buffer, std::string_view field) {
  buffer += std::to_string(field.size());
  buffer += ':';
  buffer.append(field);
  buffer += ';';
}

std::string HexSha256(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kInvalidArgument, "sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

ErrorCode CodeFromName(const std::string& name) {
  for (ErrorCode code :
       {ErrorCode::kTransport, ErrorCode::kAuthentication, ErrorCode::kRateLimited,
        ErrorCode::kEmptyCompletion, ErrorCode::kUnscripted, ErrorCode::kInvalidArgument}) {
    if (name == ErrorCodeName(code)) return code;
  }
  throw Error(ErrorCode::kConfig, "mock script: unknown error kind '" + name + "'");
}

bool IsRetryable(ErrorCode code) {
  return code == ErrorCode::kTransport || code == ErrorCode::kRateLimited;
}

void DefaultSleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

}  // namespace

void ChatRequest::Validate() const {
  if (user_text.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "chat request has empty user_text");
  }
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature must be within [0, 2]");
  }
  if (max_tokens <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "max_tokens must be positive");
  }
}

void ProviderConfig::Validate() const {
  if (max_concurrency < 1) {
    throw Error(ErrorCode::kConfig, "max_concurrency must be >= 1");
  }
  if (max_retries < 0) {
    throw Error(ErrorCode::kConfig, "max_retries must be >= 0");
  }
}

std::string CacheKey(const ChatRequest& request) {
  char temperature[32];
  std::snprintf(temperature, sizeof(temperature), "%.17g", request.temperature);
  std::string buffer;
  AppendField(buffer, request.model_id);
  AppendField(buffer, request.system_text);
  AppendField(buffer, request.user_text);
  AppendField(buffer, temperature);
  AppendField(buffer, std::to_string(request.max_tokens));
  return HexSha256(buffer);
}

// ---------------------------------------------------------------------------
// MockBackend

std::shared_ptr<MockBackend> MockBackend::FromJson(const Json& script) {
  if (!script.is_object()) {
    throw Error(ErrorCode::kConfig, "mock script must be a JSON object");
  }
  std::vector<Rule> rules;
  if (script.contains("rules")) {
    for (const auto& item : script.at("rules")) {
      Rule rule;
      if (item.contains("exact")) rule.exact = item.at("exact").get<std::string>();
      if (item.contains("all_of")) {
        rule.all_of = item.at("all_of").get<std::vector<std::string>>();
      }
      if (!rule.exact && rule.all_of.empty()) {
        throw Error(ErrorCode::kConfig, "mock rule needs 'exact' or a non-empty 'all_of'");
      }
      if (item.contains("error")) {
        rule.error = item.at("error").get<std::string>();
        CodeFromName(*rule.error);
      } else {
        rule.response = item.at("response").get<std::string>();
      }
      rules.push_back(std::move(rule));
    }
  }
  auto backend = std::make_shared<MockBackend>(std::move(rules));
  if (script.contains("responses")) {
    for (const auto& [prompt, response] : script.at("responses").items()) {
      backend->AddExact(prompt, response.get<std::string>());
    }
  }
  return backend;
}

std::shared_ptr<MockBackend> MockBackend::FromFile(const std::filesystem::path& path) {
  Json script = Json::parse(ReadText(path), nullptr, false);
  if (script.is_discarded()) {
    throw Error(ErrorCode::kParse, "mock script " + path.string() + " is not valid JSON");
  }
  return FromJson(script);
}

void MockBackend::AddExact(std::string prompt, std::string response) {
  Rule rule;
  rule.exact = std::move(prompt);
  rule.response = std::move(response);
  rules_.push_back(std::move(rule));
}

std::string MockBackend::Call(const ChatRequest& request) {
  for (const auto& rule : rules_) {
    bool match;
    if (rule.exact) {
      match = *rule.exact == request.user_text;
    } else {
      match = std::all_of(rule.all_of.begin(), rule.all_of.end(), [&](const std::string& s) {
        return request.user_text.find(s) != std::string::npos;
      });
    }
    if (!match) continue;
    if (rule.error) {
      throw Error(CodeFromName(*rule.error), "scripted " + *rule.error + " failure");
    }
    return rule.response;
  }
  std::string head = request.user_text.substr(0, 80);
  throw Error(ErrorCode::kUnscripted, "no scripted response for prompt starting \"" + head + "\"");
}

// ---------------------------------------------------------------------------
// HttpBackend

HttpBackend::HttpBackend(const ProviderConfig& config)
    : endpoint_(config.endpoint), timeout_(config.timeout) {
  const char* key = std::getenv(config.api_key_env_name.c_str());
  if (key == nullptr || *key == '\0') {
    throw Error(ErrorCode::kAuthentication,
                "environment variable " + config.api_key_env_name + " is not set");
  }
  api_key_ = key;
}

std::string HttpBackend::Call(const ChatRequest& request) {
  const auto scheme_end = endpoint_.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kConfig, "endpoint is not a URL: " + endpoint_);
  }
  const auto path_begin = endpoint_.find('/', scheme_end + 3);
  const std::string origin = endpoint_.substr(0, path_begin);
  const std::string path = path_begin == std::string::npos ? "/" : endpoint_.substr(path_begin);

  Json messages = Json::array();
  if (!request.system_text.empty()) {
    messages.push_back({{"role", "system"}, {"content", request.system_text}});
  }
  messages.push_back({{"role", "user"}, {"content", request.user_text}});
  Json body = {{"model", request.model_id},
               {"messages", messages},
               {"temperature", request.temperature},
               {"max_tokens", request.max_tokens}};

  httplib::Client client(origin);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
  auto result = client.Post(path, headers, body.dump(), "application/json");
  if (!result) {
    throw Error(ErrorCode::kTransport,
                "request to " + endpoint_ + " failed: " + httplib::to_string(result.error()));
  }
  const int status = result->status;
  if (status == 401 || status == 403) {
    throw Error(ErrorCode::kAuthentication, "upstream rejected credentials (HTTP " +
                                                std::to_string(status) + ")");
  }
  if (status == 429) {
    throw Error(ErrorCode::kRateLimited, "upstream rate limit (HTTP 429)");
  }
  if (status >= 500 || status == 408) {
    throw Error(ErrorCode::kTransport, "upstream HTTP " + std::to_string(status));
  }
  if (status != 200) {
    throw Error(ErrorCode::kTransport,
                "upstream HTTP " + std::to_string(status) + ": " + result->body.substr(0, 200));
  }
  Json reply = Json::parse(result->body, nullptr, false);
  if (reply.is_discarded()) {
    throw Error(ErrorCode::kTransport, "upstream returned non-JSON body");
  }
  try {
    const auto& content = reply.at("choices").at(0).at("message").at("content");
    return content.is_string() ? content.get<std::string>() : std::string();
  } catch (const Json::exception&) {
    throw Error(ErrorCode::kEmptyCompletion, "upstream reply has no choices[0].message.content");
  }
}

// ---------------------------------------------------------------------------
// ResponseCache

ResponseCache::ResponseCache(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
  if (dir_) {
    std::error_code ec;
    std::filesystem::create_directories(*dir_, ec);
    if (ec) {
      throw Error(ErrorCode::kIo, "cannot create cache directory " + dir_->string());
    }
  }
}

std::optional<std::string> ResponseCache::Get(const std::string& key) {
  std::lock_guard lock(mu_);
  if (auto it = memory_.find(key); it != memory_.end()) return it->second;
  if (dir_) {
    const auto path = *dir_ / key;
    std::ifstream in(path, std::ios::binary);
    if (in) {
      std::string text = ReadText(path);
      memory_.emplace(key, text);
      return text;
    }
  }
  return std::nullopt;
}

void ResponseCache::Put(const std::string& key, const std::string& text) {
  std::lock_guard lock(mu_);
  memory_[key] = text;
  if (dir_) {
    // write-then-rename: readers never see partial entries
    const auto final_path = *dir_ / key;
    auto tmp_path = final_path;
    tmp_path += ".tmp";
    WriteText(tmp_path, text);
    std::error_code ec;
    std::filesystem::rename(tmp_path, final_path, ec);
    if (ec) {
      throw Error(ErrorCode::kIo, "cannot store cache entry " + final_path.string());
    }
  }
}

// ---------------------------------------------------------------------------
// Provider

Provider::Provider(std::shared_ptr<Backend> backend, ProviderConfig config, SleepFn sleep)
    : backend_(std::move(backend)),
      config_((config.Validate(), std::move(config))),
      sleep_(sleep ? std::move(sleep) : SleepFn(DefaultSleep)),
      cache_(config_.cache_dir),
      gate_(config_.max_concurrency) {
  if (!backend_) {
    throw Error(ErrorCode::kInvalidArgument, "provider needs a backend");
  }
}

ChatResponse Provider::Complete(const ChatRequest& request, CacheMode mode) {
  request.Validate();
  const std::string key = CacheKey(request);
  const std::string id = backend_->Id();

  if (mode == CacheMode::kRefresh) {
    std::string text = CallWithRetries(request);
    cache_.Put(key, text);
    return {std::move(text), id, false};
  }

  if (auto hit = cache_.Get(key)) return {std::move(*hit), id, true};

  std::promise<std::string> promise;
  std::shared_future<std::string> waiting;
  {
    std::lock_guard lock(inflight_mu_);
    if (auto it = inflight_.find(key); it != inflight_.end()) {
      waiting = it->second;
    } else if (auto hit = cache_.Get(key)) {
      return {std::move(*hit), id, true};
    } else {
      inflight_.emplace(key, promise.get_future().share());
    }
  }
  if (waiting.valid()) {
    return {waiting.get(), id, true};
  }

  try {
    std::string text = CallWithRetries(request);
    cache_.Put(key, text);
    promise.set_value(text);
    std::lock_guard lock(inflight_mu_);
    inflight_.erase(key);
    return {std::move(text), id, false};
  } catch (...) {
    promise.set_exception(std::current_exception());
    std::lock_guard lock(inflight_mu_);
    inflight_.erase(key);
    throw;
  }
}

std::string Provider::CallWithRetries(const ChatRequest& request) {
  for (int attempt = 0;; ++attempt) {
    std::string text;
    try {
      gate_.acquire();
      struct Release {
        std::counting_semaphore<>& gate;
        ~Release() { gate.release(); }
      } release{gate_};
      upstream_calls_.fetch_add(1);
      text = backend_->Call(request);
    } catch (const Error& e) {
      if (!IsRetryable(e.code()) || attempt >= config_.max_retries) {
        if (IsRetryable(e.code()) && attempt > 0) {
          throw Error(e.code(), std::string(e.what()) + " (after " + std::to_string(attempt + 1) +
                                    " attempts)");
        }
        throw;
      }
      const auto delay = Backoff(attempt);
      spdlog::debug("provider {}: {} (attempt {}), retrying in {} ms", backend_->Id(), e.what(),
                    attempt + 1, delay.count());
      sleep_(delay);
      continue;
    }
    if (Trim(text).empty()) {
      throw Error(ErrorCode::kEmptyCompletion, "upstream returned an empty completion");
    }
    return text;
  }
}

std::chrono::milliseconds Provider::Backoff(int attempt) {
  const auto base = config_.base_backoff.count();
  long long delay = base << std::min(attempt, 20);
  delay = std::min<long long>(delay, config_.max_backoff.count());
  std::uint64_t jitter;
  {
    // xorshift64*
    std::lock_guard lock(jitter_mu_);
    jitter_state_ ^= jitter_state_ >> 12;
    jitter_state_ ^= jitter_state_ << 25;
    jitter_state_ ^= jitter_state_ >> 27;
    jitter = jitter_state_ * 0x2545f4914f6cdd1dULL;
  }
  if (base > 0) delay += static_cast<long long>(jitter % static_cast<std::uint64_t>(base));
  return std::chrono::milliseconds(delay);
}

}  // namespace cforge
