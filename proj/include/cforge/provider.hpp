#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "cforge/jsonl.hpp"

namespace cforge {

inline constexpr const char* kDefaultApiKeyEnv = "CONSTRAINT_FORGE_API_KEY";
inline constexpr const char* kDefaultModel = "gpt-4o";

struct ChatRequest {
  std::string system_text;
  std::string user_text;
  std::string model_id = kDefaultModel;
  double temperature = 0.0;
  int max_tokens = 2048;

  // Throws Error(kInvalidArgument) on empty user_text, temperature outside
  // [0, 2] or non-positive max_tokens.
  void Validate() const;
};

// Sampling parameters applied to every pipeline call.
struct GenerationParams {
  std::string model_id = kDefaultModel;
  double temperature = 0.0;
  int max_tokens = 2048;

  ChatRequest Request(std::string system_text, std::string user_text) const {
    return ChatRequest{std::move(system_text), std::move(user_text), model_id, temperature,
                       max_tokens};
  }
};

struct ChatResponse {
  std::string text;
  std::string provider_id;
  bool cached = false;
};

struct ProviderConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string api_key_env_name = kDefaultApiKeyEnv;
  int max_concurrency = 4;
  int max_retries = 3;
  std::optional<std::filesystem::path> cache_dir;
  std::chrono::milliseconds base_backoff{500};
  std::chrono::milliseconds max_backoff{16000};
  std::chrono::seconds timeout{120};

  void Validate() const;
};

// Hex SHA-256 over the length-prefixed (model_id, system_text, user_text,
// temperature, max_tokens). Byte-exact: no whitespace normalization.
std::string CacheKey(const ChatRequest& request);

// Raw upstream. Implementations throw cforge::Error with kTransport,
// kRateLimited, kAuthentication, kEmptyCompletion or kUnscripted.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string Id() const = 0;
  virtual std::string Call(const ChatRequest& request) = 0;
};

// Exhaustive scripted mock. Rules are tried in order; a rule matches when
// user_text equals `exact`, or contains every string in `all_of`. An
// unmatched request is an error.
class MockBackend : public Backend {
 public:
  struct Rule {
    std::optional<std::string> exact;
    std::vector<std::string> all_of;
    std::string response;
    std::optional<std::string> error;  // ErrorCode name to raise instead
  };

  MockBackend() = default;
  explicit MockBackend(std::vector<Rule> rules) : rules_(std::move(rules)) {}

  // {"responses": {"<user_text>": "<text>", ...}, "rules": [{...}, ...]}
  static std::shared_ptr<MockBackend> FromJson(const Json& script);
  static std::shared_ptr<MockBackend> FromFile(const std::filesystem::path& path);

  void AddExact(std::string prompt, std::string response);

  std::string Id() const override { return "mock"; }
  std::string Call(const ChatRequest& request) override;

 private:
  std::vector<Rule> rules_;
};

// Mock driven by a callable; the callable throws Error(kUnscripted) for
// requests it does not handle.
class FunctionBackend : public Backend {
 public:
  using Handler = std::function<std::string(const ChatRequest&)>;
  explicit FunctionBackend(Handler handler, std::string id = "mock")
      : handler_(std::move(handler)), id_(std::move(id)) {}

  std::string Id() const override { return id_; }
  std::string Call(const ChatRequest& request) override { return handler_(request); }

 private:
  Handler handler_;
  std::string id_;
};

// OpenAI-compatible chat-completions endpoint over HTTP(S).
class HttpBackend : public Backend {
 public:
  // Resolves the API key from the configured environment variable; throws
  // Error(kAuthentication) when it is unset or empty.
  explicit HttpBackend(const ProviderConfig& config);

  std::string Id() const override { return "http:" + endpoint_; }
  std::string Call(const ChatRequest& request) override;

 private:
  std::string endpoint_;
  std::string api_key_;
  std::chrono::seconds timeout_;
};

// Content-addressed response store: in memory always, plus one file per
// digest when a directory is configured.
class ResponseCache {
 public:
  explicit ResponseCache(std::optional<std::filesystem::path> dir);

  std::optional<std::string> Get(const std::string& key);
  void Put(const std::string& key, const std::string& text);

 private:
  std::optional<std::filesystem::path> dir_;
  std::mutex mu_;
  std::map<std::string, std::string> memory_;
};

enum class CacheMode {
  kUse,      // read and write
  kRefresh,  // skip the read, overwrite on success (used for reprompts)
};

class Provider {
 public:
  using SleepFn = std::function<void(std::chrono::milliseconds)>;

  Provider(std::shared_ptr<Backend> backend, ProviderConfig config, SleepFn sleep = {});

  ChatResponse Complete(const ChatRequest& request, CacheMode mode = CacheMode::kUse);

  std::size_t upstream_calls() const { return upstream_calls_.load(); }
  const ProviderConfig& config() const { return config_; }

 private:
  std::string CallWithRetries(const ChatRequest& request);
  std::chrono::milliseconds Backoff(int attempt);

  std::shared_ptr<Backend> backend_;
  ProviderConfig config_;
  SleepFn sleep_;
  ResponseCache cache_;
  std::counting_semaphore<> gate_;
  std::atomic<std::size_t> upstream_calls_{0};

  std::mutex inflight_mu_;
  std::map<std::string, std::shared_future<std::string>> inflight_;

  std::mutex jitter_mu_;
  std::uint64_t jitter_state_ = 0x2545f4914f6cdd1dULL;
};

}  // namespace cforge
