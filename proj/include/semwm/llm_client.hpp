#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "semwm/common.hpp"

namespace semwm {

class TransportError : public Error {
 public:
  using Error::Error;
};

/// 401/403: retrying cannot help.
class AuthError : public TransportError {
 public:
  using TransportError::TransportError;
};

class TimeoutError : public TransportError {
 public:
  using TransportError::TransportError;
};

class MalformedResponse : public TransportError {
 public:
  using TransportError::TransportError;
};

struct LLMClientConfig {
  std::string base_url = "https://api.openai.com";
  std::string model = "gpt-4o";
  std::string api_key;  // never logged or serialized
  double timeout_seconds = 60.0;
  int max_retries = 3;
  double temperature = 0.7;
  double backoff_initial_seconds = 0.5;
  double backoff_max_seconds = 8.0;
  std::size_t max_in_flight = 4;

  /// LLM_API_KEY and LLM_BASE_URL override the defaults when set.
  static LLMClientConfig from_env();
  /// Throws UsageError on retries < 0 or timeout <= 0.
  void validate() const;
  /// Settings with the key masked, for logs and provenance headers.
  std::string describe() const;
};

struct ChatRequest {
  std::string model;
  std::string system_prompt;
  std::string user_text;
  double temperature = 0.7;

  /// Chat-completions request body.
  std::string to_json() const;
  /// Stable key for fixture lookup (model, prompts and temperature).
  std::string hash() const;
};

/// Pulls choices[0].message.content out of a chat-completions response body.
/// Throws MalformedResponse.
std::string parse_chat_response(const std::string& body);

struct HttpResponse {
  int status = 0;  // 0 when the request never completed
  std::string body;
  std::string error;
  bool timed_out = false;
};

/// One HTTP POST; swapped out in tests.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& base_url, const std::string& path, const std::string& body,
                            const std::map<std::string, std::string>& headers, double timeout_seconds) = 0;
};

std::unique_ptr<HttpTransport> make_default_transport();

class LLMClient {
 public:
  virtual ~LLMClient() = default;
  virtual std::string chat(const std::string& system_prompt, const std::string& user_text) = 0;
};

/// Chat-completions client: one request per attempt, exponential backoff on
/// transport failures, 408, 429 and 5xx; auth failures are not retried.
class HttpLLMClient : public LLMClient {
 public:
  using Sleeper = std::function<void(std::chrono::duration<double>)>;

  explicit HttpLLMClient(LLMClientConfig config, std::unique_ptr<HttpTransport> transport = nullptr,
                         Sleeper sleeper = nullptr);

  std::string chat(const std::string& system_prompt, const std::string& user_text) override;

  /// Backoff before retry `attempt` (1-based).
  double backoff_seconds(int attempt) const;
  const LLMClientConfig& config() const { return config_; }

 private:
  LLMClientConfig config_;
  std::unique_ptr<HttpTransport> transport_;
  Sleeper sleep_;
  std::mutex gate_mutex_;
  std::condition_variable gate_cv_;
  std::size_t in_flight_ = 0;
};

/// Replays stored responses keyed by ChatRequest::hash(). Fixture files are
/// newline-delimited records {"request_hash", "response"}.
class FixtureLLMClient : public LLMClient {
 public:
  FixtureLLMClient(std::string model, double temperature, std::map<std::string, std::string> responses);
  static FixtureLLMClient load(const std::filesystem::path& path, std::string model, double temperature);

  std::string chat(const std::string& system_prompt, const std::string& user_text) override;

 private:
  std::string model_;
  double temperature_;
  std::map<std::string, std::string> responses_;
};

/// Forwards to another client and appends each exchange to a fixture file.
class RecordingLLMClient : public LLMClient {
 public:
  RecordingLLMClient(LLMClient& inner, std::filesystem::path fixture_path, std::string model, double temperature);
  std::string chat(const std::string& system_prompt, const std::string& user_text) override;

 private:
  LLMClient& inner_;
  std::filesystem::path path_;
  std::string model_;
  double temperature_;
  std::mutex mutex_;
};

}  // namespace semwm
