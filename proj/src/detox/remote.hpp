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

#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "detox/oracles.hpp"

namespace detox {

struct HttpResponse {
  int status = 0;  // 0 means the request never completed
  std::string body;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& url,
                            const std::map<std::string, std::string>& headers,
                            const std::string& body) = 0;
};

// cpp-httplib backed transport; https URLs go through OpenSSL.
class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(std::chrono::seconds timeout = std::chrono::seconds(30))
      : timeout_(timeout) {}
  HttpResponse post(const std::string& url,
                    const std::map<std::string, std::string>& headers,
                    const std::string& body) override;

 private:
  std::chrono::seconds timeout_;
};

struct Clock {
  std::function<std::chrono::steady_clock::time_point()> now =
      [] { return std::chrono::steady_clock::now(); };
  std::function<void(std::chrono::nanoseconds)> sleep;

  static Clock system();
};

// Spaces calls at least 1/rate seconds apart. Thread-safe.
class RateLimiter {
 public:
  RateLimiter(double requests_per_second, Clock clock);
  void acquire();

 private:
  std::mutex mu_;
  std::chrono::nanoseconds interval_;
  Clock clock_;
  bool first_ = true;
  std::chrono::steady_clock::time_point next_{};
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
};

struct RemoteToxicityOptions {
  std::string endpoint =
      "https://commentanalyzer.googleapis.com/v1alpha1/comments:analyze";
  std::string api_key;
  double requests_per_second = 1.0;
  RetryPolicy retry;
};

// Client for a Perspective-style analyze endpoint (TOXICITY attribute).
class RemoteToxicityClient final : public ToxicityOracle {
 public:
  RemoteToxicityClient(RemoteToxicityOptions options,
                       std::shared_ptr<HttpTransport> transport,
                       Clock clock = Clock::system());
  double score(std::string_view text) override;

  std::size_t attempts() const { return attempts_.load(); }

  static std::string request_body(std::string_view text);
  static double parse_response(const std::string& body);

 private:
  RemoteToxicityOptions options_;
  std::shared_ptr<HttpTransport> transport_;
  Clock clock_;
  RateLimiter limiter_;
  std::atomic<std::size_t> attempts_{0};
};

std::unique_ptr<RemoteToxicityClient> remote_toxicity_client(
    RemoteToxicityOptions options, std::shared_ptr<HttpTransport> transport,
    Clock clock = Clock::system());

struct RemoteLlmOptions {
  std::string endpoint = "https://api.openai.com/v1";
  std::string api_key;
  std::string model = "gpt-3.5-turbo-instruct";
  double requests_per_second = 1.0;
  RetryPolicy retry;
};

// OpenAI-compatible /chat/completions client.
class RemoteChatCompleter final : public ChatCompleter {
 public:
  RemoteChatCompleter(RemoteLlmOptions options, std::shared_ptr<HttpTransport> transport,
                      Clock clock = Clock::system());
  std::string complete(std::string_view instruction, std::string_view input) override;

 private:
  RemoteLlmOptions options_;
  std::shared_ptr<HttpTransport> transport_;
  Clock clock_;
  RateLimiter limiter_;
};

// OpenAI-compatible /completions client with nucleus sampling parameters.
// Each returned text is the prompt followed by the sampled continuation,
// matching the local generators.
class RemoteCompletionGenerator final : public Generator {
 public:
  RemoteCompletionGenerator(RemoteLlmOptions options,
                            std::shared_ptr<HttpTransport> transport,
                            Clock clock = Clock::system());
  std::vector<std::string> generate(std::string_view prompt,
                                    const SamplingConfig& config) override;

 private:
  RemoteLlmOptions options_;
  std::shared_ptr<HttpTransport> transport_;
  Clock clock_;
  RateLimiter limiter_;
};

// POSTs with rate limiting and exponential backoff on transient failures
// (transport errors and 429/5xx statuses). Throws kService when retries
// run out and on non-transient statuses.
std::string post_with_retry(HttpTransport& transport, RateLimiter& limiter,
                            const Clock& clock, const RetryPolicy& retry,
                            const std::string& url,
                            const std::map<std::string, std::string>& headers,
                            const std::string& body,
                            std::atomic<std::size_t>* attempts = nullptr);

inline constexpr const char* kToxicityKeyEnv = "DETOX_TOXICITY_API_KEY";
inline constexpr const char* kLlmKeyEnv = "DETOX_LLM_API_KEY";

// Reads an API key from the environment; throws kConfiguration if unset.
std::string require_env_key(const char* name);

}  // namespace detox
