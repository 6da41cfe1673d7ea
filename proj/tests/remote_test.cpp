// Copyright 2026 The Detox-Chain Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cstdlib>
#include <deque>

#include "detox/json.hpp"
#include "detox/remote.hpp"

using namespace detox;
using namespace std::chrono;

namespace {

struct Request {
  std::string url;
  std::map<std::string, std::string> headers;
  std::string body;
};

class FakeTransport final : public HttpTransport {
 public:
  explicit FakeTransport(std::deque<HttpResponse> replies) : replies_(std::move(replies)) {}
  HttpResponse post(const std::string& url, const std::map<std::string, std::string>& headers,
                    const std::string& body) override {
    requests.push_back({url, headers, body});
    if (replies_.empty()) return {500, "no more replies"};
    HttpResponse r = replies_.front();
    replies_.pop_front();
    return r;
  }
  std::vector<Request> requests;

 private:
  std::deque<HttpResponse> replies_;
};

// Virtual time: sleeping advances the clock instead of blocking.
struct FakeTime {
  steady_clock::time_point t{};
  std::vector<nanoseconds> sleeps;
  Clock clock() {
    Clock c;
    c.now = [this] { return t; };
    c.sleep = [this](nanoseconds d) {
      sleeps.push_back(d);
      t += d;
    };
    return c;
  }
};

std::string toxicity_reply(double v) {
  return Json{{"attributeScores", {{"TOXICITY", {{"summaryScore", {{"value", v}}}}}}}}.dump();
}

RemoteToxicityOptions tox_options() {
  RemoteToxicityOptions o;
  o.endpoint = "http://fake/analyze";
  o.api_key = "k";
  o.requests_per_second = 1000.0;
  o.retry.initial_backoff = milliseconds(100);
  return o;
}

RemoteLlmOptions llm_options() {
  RemoteLlmOptions o;
  o.endpoint = "http://fake/v1";
  o.api_key = "secret";
  o.requests_per_second = 1000.0;
  return o;
}

}  // namespace

TEST(RemoteToxicity, SendsAnalyzeRequestAndParsesScore) {
  FakeTime ft;
  auto tr = std::make_shared<FakeTransport>(std::deque<HttpResponse>{{200, toxicity_reply(0.7)}});
  RemoteToxicityClient c(tox_options(), tr, ft.clock());
  EXPECT_DOUBLE_EQ(c.score("hello"), 0.7);
  ASSERT_EQ(tr->requests.size(), 1u);
  EXPECT_EQ(tr->requests[0].url, "http://fake/analyze?key=k");
  auto body = Json::parse(tr->requests[0].body);
  EXPECT_EQ(body["comment"]["text"], "hello");
  EXPECT_TRUE(body["requestedAttributes"].contains("TOXICITY"));
}

TEST(RemoteToxicity, RetriesTransientFailuresWithExponentialBackoff) {
  FakeTime ft;
  auto tr = std::make_shared<FakeTransport>(std::deque<HttpResponse>{
      {0, "connection refused"}, {429, "slow down"}, {503, ""}, {200, toxicity_reply(0.1)}});
  RemoteToxicityClient c(tox_options(), tr, ft.clock());
  EXPECT_DOUBLE_EQ(c.score("x"), 0.1);
  EXPECT_EQ(c.attempts(), 4u);
  std::vector<nanoseconds> backoffs;
  for (auto d : ft.sleeps)
    if (d >= milliseconds(100)) backoffs.push_back(d);
  ASSERT_EQ(backoffs.size(), 3u);
  EXPECT_EQ(backoffs[0], milliseconds(100));
  EXPECT_EQ(backoffs[1], milliseconds(200));
  EXPECT_EQ(backoffs[2], milliseconds(400));
}

TEST(RemoteToxicity, GivesUpAfterMaxRetries) {
  FakeTime ft;
  auto tr = std::make_shared<FakeTransport>(std::deque<HttpResponse>{});
  RemoteToxicityClient c(tox_options(), tr, ft.clock());
  try {
    c.score("x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kService);
  }
  EXPECT_EQ(tr->requests.size(), 4u);
}

TEST(RemoteToxicity, ClientErrorsAreNotRetried) {
  FakeTime ft;
  auto tr = std::make_shared<FakeTransport>(std::deque<HttpResponse>{{400, "bad"}});
  RemoteToxicityClient c(tox_options(), tr, ft.clock());
  EXPECT_THROW(c.score("x"), Error);
  EXPECT_EQ(tr->requests.size(), 1u);
}

TEST(RemoteToxicity, MalformedResponsesAreProtocolErrors) {
  for (const std::string& body : {std::string("not json"), std::string("{}"), toxicity_reply(1.5)}) {
    try {
      RemoteToxicityClient::parse_response(body);
      FAIL() << body;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kProtocol);
    }
  }
}

TEST(RemoteToxicity, MissingKeyIsConfigurationError) {
  auto o = tox_options();
  o.api_key.clear();
  try {
    RemoteToxicityClient c(o, std::make_shared<FakeTransport>(std::deque<HttpResponse>{}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfiguration);
  }
}

TEST(RateLimit, SpacesCallsByInterval) {
  FakeTime ft;
  RateLimiter rl(4.0, ft.clock());
  for (int i = 0; i < 5; ++i) rl.acquire();
  ASSERT_EQ(ft.sleeps.size(), 4u);
  for (auto d : ft.sleeps) EXPECT_EQ(d, milliseconds(250));
  ft.t += seconds(10);
  rl.acquire();
  EXPECT_EQ(ft.sleeps.size(), 4u);
  EXPECT_THROW(RateLimiter(0.0, ft.clock()), Error);
}

TEST(RemoteChat, BuildsChatRequest) {
  FakeTime ft;
  Json reply = Json::parse(R"({"choices": [{"message": {"content": "Toxic."}}]})");
  auto tr = std::make_shared<FakeTransport>(std::deque<HttpResponse>{{200, reply.dump()}});
  RemoteChatCompleter chat(llm_options(), tr, ft.clock());
  EXPECT_EQ(chat.complete("Judge it.", "some text"), "Toxic.");
  ASSERT_EQ(tr->requests.size(), 1u);
  EXPECT_EQ(tr->requests[0].url, "http://fake/v1/chat/completions");
  EXPECT_EQ(tr->requests[0].headers.at("Authorization"), "Bearer secret");
  auto body = Json::parse(tr->requests[0].body);
  EXPECT_EQ(body["messages"][0]["content"], "Judge it.");
  EXPECT_EQ(body["messages"][1]["content"], "some text");
}

TEST(RemoteCompletion, PassesSamplingAndPrefixesPrompt) {
  FakeTime ft;
  Json reply = Json::parse(R"({"choices": [{"text": " went home"}, {"text": "stayed"}]})");
  auto tr = std::make_shared<FakeTransport>(std::deque<HttpResponse>{{200, reply.dump()}});
  RemoteCompletionGenerator g(llm_options(), tr, ft.clock());
  SamplingConfig sc;
  sc.num_samples = 2;
  auto out = g.generate("she", sc);
  EXPECT_EQ(out, (std::vector<std::string>{"she went home", "she stayed"}));
  auto body = Json::parse(tr->requests[0].body);
  EXPECT_EQ(body["n"], 2);
  EXPECT_DOUBLE_EQ(body["top_p"].get<double>(), 0.9);
  EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 1.0);
  EXPECT_EQ(body["max_tokens"], 512);
}

TEST(RemoteCompletion, WrongSampleCountIsProtocolError) {
  FakeTime ft;
  Json reply = Json::parse(R"({"choices": [{"text": "x"}]})");
  auto tr = std::make_shared<FakeTransport>(std::deque<HttpResponse>{{200, reply.dump()}});
  RemoteCompletionGenerator g(llm_options(), tr, ft.clock());
  SamplingConfig sc;
  sc.num_samples = 3;
  try {
    g.generate("p", sc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kProtocol);
  }
}

TEST(EnvKey, MissingVariableIsConfigurationError) {
  ::unsetenv("DETOX_TEST_UNSET_KEY");
  try {
    require_env_key("DETOX_TEST_UNSET_KEY");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfiguration);
    EXPECT_NE(std::string(e.what()).find("DETOX_TEST_UNSET_KEY"), std::string::npos);
  }
  ::setenv("DETOX_TEST_SET_KEY", "abc", 1);
  EXPECT_EQ(require_env_key("DETOX_TEST_SET_KEY"), "abc");
}
