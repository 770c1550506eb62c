#include "semwm/llm_client.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "httplib.h"

namespace semwm {

using nlohmann::json;

LLMClientConfig LLMClientConfig::from_env() {
  LLMClientConfig c;
  if (const char* key = std::getenv("LLM_API_KEY")) c.api_key = key;
  if (const char* url = std::getenv("LLM_BASE_URL"); url && *url) c.base_url = url;
  return c;
}

void LLMClientConfig::validate() const {
  if (max_retries < 0) throw UsageError("llm client: max_retries must be >= 0");
  if (!(timeout_seconds > 0.0)) throw UsageError("llm client: timeout must be > 0");
  if (base_url.empty()) throw UsageError("llm client: empty base url");
  if (max_in_flight == 0) throw UsageError("llm client: max_in_flight must be >= 1");
}

std::string LLMClientConfig::describe() const {
  std::ostringstream os;
  os << "base_url=" << base_url << " model=" << model << " timeout=" << timeout_seconds
     << " max_retries=" << max_retries << " temperature=" << temperature
     << " api_key=" << (api_key.empty() ? "<unset>" : "<redacted>");
  return os.str();
}

std::string ChatRequest::to_json() const {
  json body = {{"model", model},
               {"temperature", temperature},
               {"messages", json::array({{{"role", "system"}, {"content", system_prompt}},
                                         {{"role", "user"}, {"content", user_text}}})}};
  return body.dump();
}

std::string ChatRequest::hash() const {
  // Length-prefixed fields so boundaries cannot collide.
  std::uint64_t h = kFnvOffset;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", temperature);
  for (const std::string* f : {&model, &system_prompt, &user_text}) {
    h = fnv1a64(std::to_string(f->size()) + ":", h);
    h = fnv1a64(*f, h);
  }
  h = fnv1a64(buf, h);
  return to_hex(h);
}

std::string parse_chat_response(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw MalformedResponse(std::string("response is not JSON: ") + e.what());
  }
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw MalformedResponse("message content is not a string");
    return content.get<std::string>();
  } catch (const json::exception&) {
    throw MalformedResponse("response lacks choices[0].message.content");
  }
}

namespace {

class HttplibTransport : public HttpTransport {
 public:
  HttpResponse post(const std::string& base_url, const std::string& path, const std::string& body,
                    const std::map<std::string, std::string>& headers, double timeout_seconds) override {
    httplib::Client cli(base_url);
    const auto secs = static_cast<time_t>(timeout_seconds);
    const auto usecs = static_cast<time_t>((timeout_seconds - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    httplib::Headers hs;
    for (const auto& [k, v] : headers) hs.emplace(k, v);
    HttpResponse out;
    auto res = cli.Post(path, hs, body, "application/json");
    if (!res) {
      const auto err = res.error();
      out.error = httplib::to_string(err);
      out.timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
      return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
  }
};

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

std::unique_ptr<HttpTransport> make_default_transport() { return std::make_unique<HttplibTransport>(); }

HttpLLMClient::HttpLLMClient(LLMClientConfig config, std::unique_ptr<HttpTransport> transport, Sleeper sleeper)
    : config_(std::move(config)), transport_(std::move(transport)), sleep_(std::move(sleeper)) {
  config_.validate();
  if (!transport_) transport_ = make_default_transport();
  if (!sleep_) sleep_ = [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
}

double HttpLLMClient::backoff_seconds(int attempt) const {
  const double d = config_.backoff_initial_seconds * std::pow(2.0, attempt - 1);
  return std::min(d, config_.backoff_max_seconds);
}

std::string HttpLLMClient::chat(const std::string& system_prompt, const std::string& user_text) {
  {
    std::unique_lock lock(gate_mutex_);
    gate_cv_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
    ++in_flight_;
  }
  struct Release {
    HttpLLMClient* self;
    ~Release() {
      {
        std::lock_guard lock(self->gate_mutex_);
        --self->in_flight_;
      }
      self->gate_cv_.notify_one();
    }
  } release{this};

  const ChatRequest req{config_.model, system_prompt, user_text, config_.temperature};
  const std::string body = req.to_json();
  std::map<std::string, std::string> headers;
  if (!config_.api_key.empty()) headers["Authorization"] = "Bearer " + config_.api_key;

  std::string last_error;
  bool last_timed_out = false;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) sleep_(std::chrono::duration<double>(backoff_seconds(attempt)));
    const auto res = transport_->post(config_.base_url, "/v1/chat/completions", body, headers, config_.timeout_seconds);
    if (res.status == 401 || res.status == 403) {
      throw AuthError("llm endpoint rejected credentials (HTTP " + std::to_string(res.status) + ")");
    }
    if (res.status >= 200 && res.status < 300) return parse_chat_response(res.body);
    if (res.status != 0 && !retryable_status(res.status)) {
      throw TransportError("llm endpoint returned HTTP " + std::to_string(res.status));
    }
    last_timed_out = res.status == 0 && res.timed_out;
    last_error = res.status == 0 ? res.error : "HTTP " + std::to_string(res.status);
  }
  const std::string msg =
      "llm request failed after " + std::to_string(config_.max_retries + 1) + " attempts: " + last_error;
  if (last_timed_out) throw TimeoutError(msg);
  throw TransportError(msg);
}

FixtureLLMClient::FixtureLLMClient(std::string model, double temperature, std::map<std::string, std::string> responses)
    : model_(std::move(model)), temperature_(temperature), responses_(std::move(responses)) {}

FixtureLLMClient FixtureLLMClient::load(const std::filesystem::path& path, std::string model, double temperature) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open fixture file: " + path.string());
  std::map<std::string, std::string> responses;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      responses[j.at("request_hash").get<std::string>()] = j.at("response").get<std::string>();
    } catch (const json::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad fixture record");
    }
  }
  return FixtureLLMClient(std::move(model), temperature, std::move(responses));
}

std::string FixtureLLMClient::chat(const std::string& system_prompt, const std::string& user_text) {
  const auto key = ChatRequest{model_, system_prompt, user_text, temperature_}.hash();
  const auto it = responses_.find(key);
  if (it == responses_.end()) throw DataError("no fixture for request " + key);
  return it->second;
}

RecordingLLMClient::RecordingLLMClient(LLMClient& inner, std::filesystem::path fixture_path, std::string model,
                                       double temperature)
    : inner_(inner), path_(std::move(fixture_path)), model_(std::move(model)), temperature_(temperature) {}

std::string RecordingLLMClient::chat(const std::string& system_prompt, const std::string& user_text) {
  std::string response = inner_.chat(system_prompt, user_text);
  const auto key = ChatRequest{model_, system_prompt, user_text, temperature_}.hash();
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw DataError("cannot write fixture file: " + path_.string());
  out << json{{"request_hash", key}, {"response", response}}.dump() << '\n';
  return response;
}

}  // namespace semwm
