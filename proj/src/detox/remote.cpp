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

#include "detox/remote.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "detox/json.hpp"
#include "detox/text.hpp"

namespace detox {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw Error(ErrorCode::kConfiguration, "endpoint '" + url + "' has no scheme");
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool transient(int status) { return status == 0 || status == 429 || status >= 500; }

}  // namespace

HttpResponse HttplibTransport::post(const std::string& url,
                                    const std::map<std::string, std::string>& headers,
                                    const std::string& body) {
  SplitUrl u = split_url(url);
  httplib::Client client(u.origin);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(u.path, h, body, "application/json");
  if (!res) return {0, httplib::to_string(res.error())};
  return {res->status, res->body};
}

Clock Clock::system() {
  Clock c;
  c.sleep = [](std::chrono::nanoseconds d) { std::this_thread::sleep_for(d); };
  return c;
}

RateLimiter::RateLimiter(double rps, Clock clock) : clock_(std::move(clock)) {
  if (!(rps > 0.0)) throw Error(ErrorCode::kConfiguration, "rate limit must be > 0");
  interval_ = std::chrono::nanoseconds(static_cast<std::int64_t>(1e9 / rps));
  if (!clock_.sleep) clock_.sleep = Clock::system().sleep;
}

void RateLimiter::acquire() {
  std::lock_guard lock(mu_);
  auto now = clock_.now();
  if (!first_ && now < next_) {
    clock_.sleep(next_ - now);
    now = next_;
  }
  first_ = false;
  next_ = now + interval_;
}

std::string post_with_retry(HttpTransport& transport, RateLimiter& limiter,
                            const Clock& clock, const RetryPolicy& retry,
                            const std::string& url,
                            const std::map<std::string, std::string>& headers,
                            const std::string& body,
                            std::atomic<std::size_t>* attempts) {
  auto backoff = std::chrono::duration_cast<std::chrono::nanoseconds>(retry.initial_backoff);
  HttpResponse last;
  for (int attempt = 0; attempt <= retry.max_retries; ++attempt) {
    if (attempt > 0 && clock.sleep) {
      clock.sleep(backoff);
      backoff = std::chrono::nanoseconds(
          static_cast<std::int64_t>(static_cast<double>(backoff.count()) * retry.multiplier));
    }
    limiter.acquire();
    if (attempts) ++*attempts;
    last = transport.post(url, headers, body);
    if (last.status >= 200 && last.status < 300) return last.body;
    if (!transient(last.status)) break;
  }
  throw Error(ErrorCode::kService, "remote call to " + url + " failed with status " +
                                       std::to_string(last.status) + ": " +
                                       last.body.substr(0, 200));
}

std::string require_env_key(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v)
    throw Error(ErrorCode::kConfiguration, std::string("missing API key: set ") + name);
  return v;
}

RemoteToxicityClient::RemoteToxicityClient(RemoteToxicityOptions options,
                                           std::shared_ptr<HttpTransport> transport,
                                           Clock clock)
    : options_(std::move(options)),
      transport_(std::move(transport)),
      clock_(std::move(clock)),
      limiter_(options_.requests_per_second, clock_) {
  if (options_.api_key.empty())
    throw Error(ErrorCode::kConfiguration,
                std::string("missing toxicity API key (") + kToxicityKeyEnv + ")");
  if (!transport_) throw Error(ErrorCode::kConfiguration, "no HTTP transport");
}

std::string RemoteToxicityClient::request_body(std::string_view text) {
  Json j;
  j["comment"]["text"] = std::string(text);
  j["requestedAttributes"]["TOXICITY"] = Json::object();
  j["doNotStore"] = true;
  return j.dump();
}

double RemoteToxicityClient::parse_response(const std::string& body) {
  try {
    auto j = Json::parse(body);
    double v = j.at("attributeScores").at("TOXICITY").at("summaryScore").at("value").get<double>();
    if (!(v >= 0.0 && v <= 1.0))
      throw Error(ErrorCode::kProtocol, "toxicity score outside [0,1]");
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kProtocol, std::string("malformed toxicity response: ") + e.what());
  }
}

double RemoteToxicityClient::score(std::string_view text) {
  std::string url = options_.endpoint + "?key=" + options_.api_key;
  std::string body = post_with_retry(*transport_, limiter_, clock_, options_.retry, url,
                                     {}, request_body(text), &attempts_);
  return parse_response(body);
}

std::unique_ptr<RemoteToxicityClient> remote_toxicity_client(
    RemoteToxicityOptions options, std::shared_ptr<HttpTransport> transport, Clock clock) {
  return std::make_unique<RemoteToxicityClient>(std::move(options), std::move(transport),
                                                std::move(clock));
}

RemoteChatCompleter::RemoteChatCompleter(RemoteLlmOptions options,
                                         std::shared_ptr<HttpTransport> transport,
                                         Clock clock)
    : options_(std::move(options)),
      transport_(std::move(transport)),
      clock_(std::move(clock)),
      limiter_(options_.requests_per_second, clock_) {
  if (options_.api_key.empty())
    throw Error(ErrorCode::kConfiguration,
                std::string("missing LLM API key (") + kLlmKeyEnv + ")");
  if (!transport_) throw Error(ErrorCode::kConfiguration, "no HTTP transport");
}

std::string RemoteChatCompleter::complete(std::string_view instruction,
                                          std::string_view input) {
  Json req;
  req["model"] = options_.model;
  req["messages"] = Json::array(
      {Json{{"role", "system"}, {"content", std::string(instruction)}},
       Json{{"role", "user"}, {"content", std::string(input)}}});
  std::string body = post_with_retry(
      *transport_, limiter_, clock_, options_.retry, options_.endpoint + "/chat/completions",
      {{"Authorization", "Bearer " + options_.api_key}}, req.dump());
  try {
    return Json::parse(body).at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kProtocol, std::string("malformed chat response: ") + e.what());
  }
}

RemoteCompletionGenerator::RemoteCompletionGenerator(RemoteLlmOptions options,
                                                     std::shared_ptr<HttpTransport> transport,
                                                     Clock clock)
    : options_(std::move(options)),
      transport_(std::move(transport)),
      clock_(std::move(clock)),
      limiter_(options_.requests_per_second, clock_) {
  if (options_.api_key.empty())
    throw Error(ErrorCode::kConfiguration,
                std::string("missing LLM API key (") + kLlmKeyEnv + ")");
  if (!transport_) throw Error(ErrorCode::kConfiguration, "no HTTP transport");
}

std::vector<std::string> RemoteCompletionGenerator::generate(std::string_view prompt,
                                                             const SamplingConfig& config) {
  config.validate();
  Json req;
  req["model"] = options_.model;
  req["prompt"] = std::string(prompt);
  req["n"] = config.num_samples;
  req["top_p"] = config.top_p;
  req["temperature"] = config.temperature;
  req["max_tokens"] = config.max_length;
  req["seed"] = config.seed;
  std::string body = post_with_retry(
      *transport_, limiter_, clock_, options_.retry, options_.endpoint + "/completions",
      {{"Authorization", "Bearer " + options_.api_key}}, req.dump());
  std::vector<std::string> out;
  try {
    const Json parsed = Json::parse(body);
    for (const auto& choice : parsed.at("choices"))
      out.push_back(std::string(prompt) + " " + std::string(trim(choice.at("text").get<std::string>())));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kProtocol, std::string("malformed completion response: ") + e.what());
  }
  if (out.size() != config.num_samples)
    throw Error(ErrorCode::kProtocol, "completion service returned " +
                                          std::to_string(out.size()) + " samples, expected " +
                                          std::to_string(config.num_samples));
  return out;
}

}  // namespace detox
