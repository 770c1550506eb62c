#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "semwm/llm_client.hpp"
#include "support.hpp"

using namespace semwm;
using nlohmann::json;

namespace {

std::string completion(const std::string& content) {
  return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}}.dump();
}

// Local chat-completions endpoint. `handler` decides each response from the
// 0-based request number and the request body.
class StubServer {
 public:
  using Handler = std::function<void(int, const httplib::Request&, httplib::Response&)>;

  explicit StubServer(Handler h) : handler_(std::move(h)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = requests_++;
      const int now = ++active_;
      int seen = max_active_.load();
      while (now > seen && !max_active_.compare_exchange_weak(seen, now)) {
      }
      last_auth_ = req.get_header_value("Authorization");
      handler_(n, req, res);
      --active_;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int requests() const { return requests_; }
  int max_active() const { return max_active_; }
  std::string last_auth() const { return last_auth_; }

 private:
  Handler handler_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> requests_{0}, active_{0}, max_active_{0};
  std::string last_auth_;
};

void echo(int, const httplib::Request& req, httplib::Response& res) {
  const auto body = json::parse(req.body);
  res.set_content(completion(body.at("messages").at(1).at("content").get<std::string>()), "application/json");
}

LLMClientConfig config_for(const StubServer& s, int retries = 0) {
  LLMClientConfig c;
  c.base_url = s.url();
  c.model = "stub-model";
  c.api_key = "sk-test-SECRET";
  c.max_retries = retries;
  c.timeout_seconds = 5;
  return c;
}

struct SleepLog {
  std::vector<double> calls;
  HttpLLMClient::Sleeper fn() {
    return [this](std::chrono::duration<double> d) { calls.push_back(d.count()); };
  }
};

}  // namespace

TEST(ChatRequest, WireFormat) {
  ChatRequest r{"m", "sys", "hello", 0.5};
  auto j = json::parse(r.to_json());
  EXPECT_EQ(j["model"], "m");
  EXPECT_EQ(j["temperature"], 0.5);
  EXPECT_EQ(j["messages"][0]["role"], "system");
  EXPECT_EQ(j["messages"][0]["content"], "sys");
  EXPECT_EQ(j["messages"][1]["role"], "user");
  EXPECT_EQ(j["messages"][1]["content"], "hello");
}

TEST(ChatRequest, HashSeparatesFields) {
  ChatRequest a{"m", "ab", "c", 0.7}, b{"m", "a", "bc", 0.7}, c{"m", "ab", "c", 0.8};
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
  EXPECT_EQ(a.hash(), (ChatRequest{"m", "ab", "c", 0.7}).hash());
}

TEST(ParseChatResponse, ExtractsContentOrThrows) {
  EXPECT_EQ(parse_chat_response(completion("hi")), "hi");
  EXPECT_THROW(parse_chat_response("not json"), MalformedResponse);
  EXPECT_THROW(parse_chat_response("{\"choices\": []}"), MalformedResponse);
  EXPECT_THROW(parse_chat_response("{\"choices\": [{\"message\": {\"content\": 3}}]}"), MalformedResponse);
}

TEST(LLMClientConfig, ValidationAndRedaction) {
  LLMClientConfig c;
  c.api_key = "sk-live-0123456789";
  EXPECT_EQ(c.describe().find("sk-live"), std::string::npos);
  EXPECT_NE(c.describe().find("<redacted>"), std::string::npos);
  c.max_retries = -1;
  EXPECT_THROW(c.validate(), UsageError);
  c.max_retries = 0;
  c.timeout_seconds = 0;
  EXPECT_THROW(c.validate(), UsageError);
}

TEST(LLMClientConfig, ReadsEnvironment) {
  ::setenv("LLM_API_KEY", "k-env", 1);
  ::setenv("LLM_BASE_URL", "http://localhost:9", 1);
  auto c = LLMClientConfig::from_env();
  EXPECT_EQ(c.api_key, "k-env");
  EXPECT_EQ(c.base_url, "http://localhost:9");
  ::unsetenv("LLM_API_KEY");
  ::unsetenv("LLM_BASE_URL");
}

TEST(HttpLLMClient, EchoServer) {
  StubServer s(echo);
  HttpLLMClient client(config_for(s));
  EXPECT_EQ(client.chat("be brief", "hello there"), "hello there");
  EXPECT_EQ(s.requests(), 1);
  EXPECT_EQ(s.last_auth(), "Bearer sk-test-SECRET");
}

TEST(HttpLLMClient, RetriesServerErrorThenSucceeds) {
  StubServer s([](int n, const httplib::Request& req, httplib::Response& res) {
    if (n == 0) {
      res.status = 500;
      res.set_content("boom", "text/plain");
    } else {
      echo(n, req, res);
    }
  });
  SleepLog sleeps;
  HttpLLMClient client(config_for(s, 1), nullptr, sleeps.fn());
  EXPECT_EQ(client.chat("s", "again"), "again");
  EXPECT_EQ(s.requests(), 2);
  EXPECT_EQ(sleeps.calls, (std::vector<double>{0.5}));
}

TEST(HttpLLMClient, AuthFailureIsNotRetried) {
  StubServer s([](int, const httplib::Request&, httplib::Response& res) { res.status = 401; });
  SleepLog sleeps;
  HttpLLMClient client(config_for(s, 3), nullptr, sleeps.fn());
  EXPECT_THROW(client.chat("s", "u"), AuthError);
  EXPECT_EQ(s.requests(), 1);
  EXPECT_TRUE(sleeps.calls.empty());
}

TEST(HttpLLMClient, OtherClientErrorsAreNotRetried) {
  StubServer s([](int, const httplib::Request&, httplib::Response& res) { res.status = 400; });
  HttpLLMClient client(config_for(s, 3), nullptr, SleepLog{}.fn());
  EXPECT_THROW(client.chat("s", "u"), TransportError);
  EXPECT_EQ(s.requests(), 1);
}

TEST(HttpLLMClient, MalformedBody) {
  StubServer s([](int, const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"unexpected\": true}", "application/json");
  });
  HttpLLMClient client(config_for(s));
  EXPECT_THROW(client.chat("s", "u"), MalformedResponse);
}

TEST(HttpLLMClient, GivesUpAfterRetriesWithBackoff) {
  StubServer s([](int, const httplib::Request&, httplib::Response& res) { res.status = 503; });
  SleepLog sleeps;
  HttpLLMClient client(config_for(s, 2), nullptr, sleeps.fn());
  EXPECT_THROW(client.chat("s", "u"), TransportError);
  EXPECT_EQ(s.requests(), 3);
  EXPECT_EQ(sleeps.calls, (std::vector<double>{0.5, 1.0}));
}

TEST(HttpLLMClient, BackoffIsCapped) {
  LLMClientConfig c;
  HttpLLMClient client(c, nullptr, SleepLog{}.fn());
  EXPECT_DOUBLE_EQ(client.backoff_seconds(1), 0.5);
  EXPECT_DOUBLE_EQ(client.backoff_seconds(4), 4.0);
  EXPECT_DOUBLE_EQ(client.backoff_seconds(10), 8.0);
}

TEST(HttpLLMClient, TimeoutIsBounded) {
  StubServer s([](int, const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1200));
    res.set_content(completion("late"), "application/json");
  });
  auto cfg = config_for(s, 1);
  cfg.timeout_seconds = 0.2;
  cfg.backoff_initial_seconds = 0.05;
  HttpLLMClient client(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_THROW(client.chat("s", "u"), TimeoutError);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LE(elapsed, cfg.timeout_seconds * 2 + 0.05 + 0.5);
}

TEST(HttpLLMClient, UnreachableEndpoint) {
  LLMClientConfig c;
  c.base_url = "http://127.0.0.1:1";
  c.max_retries = 1;
  c.timeout_seconds = 1;
  SleepLog sleeps;
  HttpLLMClient client(c, nullptr, sleeps.fn());
  EXPECT_THROW(client.chat("s", "u"), TransportError);
  EXPECT_EQ(sleeps.calls.size(), 1u);
}

TEST(HttpLLMClient, InFlightCap) {
  StubServer s([](int n, const httplib::Request& req, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(60));
    echo(n, req, res);
  });
  auto cfg = config_for(s);
  cfg.max_in_flight = 2;
  HttpLLMClient client(cfg);
  std::vector<std::thread> ts;
  for (int i = 0; i < 6; ++i) ts.emplace_back([&, i] { EXPECT_EQ(client.chat("s", std::to_string(i)), std::to_string(i)); });
  for (auto& t : ts) t.join();
  EXPECT_EQ(s.requests(), 6);
  EXPECT_LE(s.max_active(), 2);
}

TEST(Fixtures, RecordThenReplayByteExact) {
  auto dir = test::scratch_dir("fixtures");
  const std::string tricky = "line one\nline \"two\" \xc3\xa9 [MODIFIED_TEXT]";
  {
    StubServer s(echo);
    auto cfg = config_for(s);
    HttpLLMClient http(cfg);
    RecordingLLMClient rec(http, dir / "fx.jsonl", cfg.model, cfg.temperature);
    EXPECT_EQ(rec.chat("sys", tricky), tricky);
    EXPECT_EQ(rec.chat("sys", "second"), "second");
  }
  auto replay = FixtureLLMClient::load(dir / "fx.jsonl", "stub-model", 0.7);
  EXPECT_EQ(replay.chat("sys", tricky), tricky);
  EXPECT_EQ(replay.chat("sys", "second"), "second");
  EXPECT_THROW(replay.chat("sys", "never recorded"), DataError);

  std::ifstream in(dir / "fx.jsonl");
  std::string all((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(all.find("sk-test-SECRET"), std::string::npos);
}

TEST(Fixtures, CorruptFileIsRejected) {
  auto dir = test::scratch_dir("fixtures_bad");
  std::ofstream(dir / "fx.jsonl") << "{\"request_hash\": 1}\n";
  EXPECT_THROW(FixtureLLMClient::load(dir / "fx.jsonl", "m", 0.7), FormatError);
  EXPECT_THROW(FixtureLLMClient::load(dir / "missing.jsonl", "m", 0.7), DataError);
}
