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

#include "detox/oracles.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "detox/designed_prompts.hpp"
#include "detox/json.hpp"
#include "detox/text.hpp"

namespace detox {

void SamplingConfig::validate() const {
  if (!(top_p > 0.0 && top_p <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "top_p must be in (0,1]");
  if (!(temperature > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "temperature must be > 0");
  if (num_samples < 1)
    throw Error(ErrorCode::kInvalidArgument, "num_samples must be >= 1");
  if (max_length < 1)
    throw Error(ErrorCode::kInvalidArgument, "max_length must be >= 1");
}

LexiconToxicityOracle::LexiconToxicityOracle(std::map<std::string, double> lexicon) {
  for (auto& [word, s] : lexicon) {
    if (!(s >= 0.0 && s <= 1.0))
      throw Error(ErrorCode::kInvalidArgument,
                  "lexicon score for '" + word + "' outside [0,1]");
    double& slot = lexicon_[normalize_token(word)];
    slot = std::max(slot, s);
  }
}

double LexiconToxicityOracle::score(std::string_view text) {
  double best = 0.0;
  for (const Token& t : tokenize(text)) {
    auto it = lexicon_.find(normalize_token(t.text));
    if (it != lexicon_.end()) best = std::max(best, it->second);
  }
  return best;
}

std::unique_ptr<ToxicityOracle> lexicon_toxicity_oracle(
    std::map<std::string, double> lexicon) {
  return std::make_unique<LexiconToxicityOracle>(std::move(lexicon));
}

ScriptedToxicityOracle::ScriptedToxicityOracle(std::vector<double> scores)
    : scores_(std::move(scores)) {}

double ScriptedToxicityOracle::score(std::string_view) {
  std::lock_guard lock(mu_);
  if (next_ >= scores_.size())
    throw Error(ErrorCode::kScriptExhausted, "toxicity script exhausted");
  return scores_[next_++];
}

std::string sha256_hex(std::string_view text) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::kInternal, "sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xf]);
  }
  return out;
}

CachedToxicityOracle::CachedToxicityOracle(std::shared_ptr<ToxicityOracle> inner,
                                           std::optional<std::filesystem::path> path)
    : inner_(std::move(inner)), path_(std::move(path)) {
  if (!inner_) throw Error(ErrorCode::kInvalidArgument, "cached(): null oracle");
  if (path_) load();
}

void CachedToxicityOracle::load() {
  std::error_code ec;
  if (!std::filesystem::exists(*path_, ec)) {
    std::ofstream touch(*path_, std::ios::app);
    if (!touch) {
      log_warning("toxicity cache '" + path_->string() +
                  "' is not writable; continuing without persistence");
      return;
    }
    persistent_ = true;
    return;
  }
  std::ifstream in(*path_);
  if (!in) {
    log_warning("toxicity cache '" + path_->string() +
                "' is not readable; continuing without persistence");
    return;
  }
  std::string line;
  std::size_t bad = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      auto j = Json::parse(line);
      Key key{j.at("hash").get<std::string>(), j.at("text_len").get<std::size_t>()};
      std::promise<double> p;
      p.set_value(j.at("score").get<double>());
      entries_.emplace(std::move(key), p.get_future().share());
    } catch (const std::exception&) {
      ++bad;
    }
  }
  if (bad) log_warning("toxicity cache: skipped " + std::to_string(bad) + " malformed lines");
  std::ofstream probe(*path_, std::ios::app);
  if (!probe) {
    log_warning("toxicity cache '" + path_->string() +
                "' is not writable; continuing without persistence");
    return;
  }
  persistent_ = true;
}

void CachedToxicityOracle::append(const Key& key, double score) {
  if (!persistent_) return;
  std::lock_guard lock(file_mu_);
  std::ofstream out(*path_, std::ios::app);
  Json j;
  j["hash"] = key.hash;
  j["text_len"] = key.text_len;
  j["score"] = score;
  out << j.dump() << '\n';
  out.flush();
  if (!out) {
    persistent_ = false;
    log_warning("toxicity cache write failed; continuing without persistence");
  }
}

double CachedToxicityOracle::score(std::string_view text) {
  Key key{sha256_hex(text), text.size()};
  std::promise<double> promise;
  std::shared_future<double> fut;
  bool owner = false;
  {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
      fut = it->second;
    } else {
      fut = promise.get_future().share();
      entries_.emplace(key, fut);
      owner = true;
    }
  }
  if (owner) {
    try {
      ++backend_calls_;
      double s = inner_->score(text);
      promise.set_value(s);
      append(key, s);
    } catch (...) {
      {
        std::lock_guard lock(mu_);
        entries_.erase(key);
      }
      promise.set_exception(std::current_exception());
      throw;
    }
  }
  return fut.get();
}

std::size_t CachedToxicityOracle::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::unique_ptr<CachedToxicityOracle> cached(std::shared_ptr<ToxicityOracle> oracle,
                                             std::optional<std::filesystem::path> path) {
  return std::make_unique<CachedToxicityOracle>(std::move(oracle), std::move(path));
}

double BagOfWordsSimilarity::sim(std::string_view a, std::string_view b) {
  std::map<std::string, double> ca, cb;
  for (const auto& t : tokenize(a)) ca[normalize_token(t.text)] += 1.0;
  for (const auto& t : tokenize(b)) cb[normalize_token(t.text)] += 1.0;
  if (ca.empty() && cb.empty()) return 1.0;
  if (ca.empty() || cb.empty()) return 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [w, c] : ca) {
    na += c * c;
    auto it = cb.find(w);
    if (it != cb.end()) dot += c * it->second;
  }
  for (const auto& [w, c] : cb) nb += c * c;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

UnigramPerplexity::UnigramPerplexity(const std::vector<std::string>& reference) {
  for (const auto& text : reference) {
    for (const auto& t : tokenize(text)) {
      ++counts_[normalize_token(t.text)];
      ++total_;
    }
  }
}

double UnigramPerplexity::ppl(std::string_view text) {
  const double denom = static_cast<double>(total_ + counts_.size() + 1);
  auto tokens = tokenize(text);
  if (tokens.empty()) return denom;
  double nll = 0.0;
  for (const auto& t : tokens) {
    auto it = counts_.find(normalize_token(t.text));
    double c = it == counts_.end() ? 0.0 : static_cast<double>(it->second);
    nll -= std::log((c + 1.0) / denom);
  }
  return std::exp(nll / static_cast<double>(tokens.size()));
}

double TablePerplexity::ppl(std::string_view text) {
  ++calls_;
  auto it = table_.find(text);
  return it == table_.end() ? fallback_ : it->second;
}

ScriptedGenerator::ScriptedGenerator(std::vector<std::vector<std::string>> script)
    : script_(std::move(script)) {
  if (script_.empty()) throw Error(ErrorCode::kInvalidArgument, "empty generator script");
}

std::vector<std::string> ScriptedGenerator::generate(std::string_view,
                                                     const SamplingConfig& config) {
  std::lock_guard lock(mu_);
  if (next_ >= script_.size())
    throw Error(ErrorCode::kScriptExhausted, "generator script exhausted");
  const auto& entry = script_[next_++];
  if (entry.size() < config.num_samples)
    throw Error(ErrorCode::kInvalidArgument,
                "generator script entry has fewer texts than num_samples");
  return {entry.begin(), entry.begin() + static_cast<std::ptrdiff_t>(config.num_samples)};
}

std::size_t ScriptedGenerator::calls() const {
  std::lock_guard lock(mu_);
  return next_;
}

ScriptedFiller::ScriptedFiller(std::vector<std::string> script)
    : script_(std::move(script)) {
  if (script_.empty()) throw Error(ErrorCode::kInvalidArgument, "empty filler script");
}

std::string ScriptedFiller::fill(std::string_view, std::string_view, std::uint64_t) {
  std::lock_guard lock(mu_);
  if (next_ >= script_.size())
    throw Error(ErrorCode::kScriptExhausted, "filler script exhausted");
  return script_[next_++];
}

std::size_t ScriptedFiller::calls() const {
  std::lock_guard lock(mu_);
  return next_;
}

ScriptedChatCompleter::ScriptedChatCompleter(std::vector<std::string> script)
    : script_(std::move(script)) {
  if (script_.empty()) throw Error(ErrorCode::kInvalidArgument, "empty chat script");
}

std::string ScriptedChatCompleter::complete(std::string_view instruction,
                                            std::string_view input) {
  std::lock_guard lock(mu_);
  if (calls_.size() >= script_.size())
    throw Error(ErrorCode::kScriptExhausted, "chat script exhausted");
  calls_.push_back({std::string(instruction), std::string(input)});
  return script_[calls_.size() - 1];
}

std::vector<ChatCall> ScriptedChatCompleter::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

VocabularyFiller::VocabularyFiller(std::vector<std::string> vocabulary)
    : vocabulary_(std::move(vocabulary)) {
  if (vocabulary_.empty())
    throw Error(ErrorCode::kInvalidArgument, "filler vocabulary is empty");
}

std::string VocabularyFiller::fill(std::string_view masked,
                                   std::string_view placeholder, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::string out;
  std::size_t pos = 0;
  for (std::size_t hit = masked.find(placeholder); hit != std::string_view::npos;
       hit = masked.find(placeholder, pos)) {
    out.append(masked.substr(pos, hit - pos));
    out.append(vocabulary_[rng() % vocabulary_.size()]);
    pos = hit + placeholder.size();
  }
  out.append(masked.substr(pos));
  return out;
}

std::vector<std::pair<std::size_t, double>> nucleus_support(
    const std::vector<double>& weights, double top_p, double temperature) {
  std::vector<std::pair<std::size_t, double>> scaled;
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    double w = std::pow(weights[i], 1.0 / temperature);
    scaled.emplace_back(i, w);
    total += w;
  }
  if (scaled.empty()) return {};
  for (auto& [i, w] : scaled) w /= total;
  std::stable_sort(scaled.begin(), scaled.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  double cum = 0.0;
  std::size_t keep = 0;
  while (keep < scaled.size()) {
    cum += scaled[keep].second;
    ++keep;
    if (cum >= top_p - 1e-12) break;
  }
  scaled.resize(keep);
  double kept = 0.0;
  for (const auto& [i, w] : scaled) kept += w;
  for (auto& [i, w] : scaled) w /= kept;
  return scaled;
}

NucleusUnigramGenerator::NucleusUnigramGenerator(
    std::vector<std::pair<std::string, double>> weighted_words,
    std::size_t words_per_sample)
    : words_(std::move(weighted_words)), words_per_sample_(words_per_sample) {
  if (words_.empty()) throw Error(ErrorCode::kInvalidArgument, "empty generator vocabulary");
}

std::vector<std::string> NucleusUnigramGenerator::generate(
    std::string_view prompt, const SamplingConfig& config) {
  config.validate();
  std::vector<double> weights;
  for (const auto& [w, p] : words_) weights.push_back(p);
  auto support = nucleus_support(weights, config.top_p, config.temperature);
  if (support.empty())
    throw Error(ErrorCode::kInvalidArgument, "generator vocabulary has no positive weight");
  std::vector<std::string> prompt_tokens = token_strings(prompt);
  std::vector<std::string> out;
  out.reserve(config.num_samples);
  for (std::size_t s = 0; s < config.num_samples; ++s) {
    std::mt19937_64 rng(mix_seed(config.seed, fnv1a64(prompt), s));
    std::vector<std::string> tokens = prompt_tokens;
    for (std::size_t n = 0; n < words_per_sample_; ++n) {
      double u = std::generate_canonical<double, 53>(rng);
      double cum = 0.0;
      std::size_t pick = support.back().first;
      for (const auto& [i, p] : support) {
        cum += p;
        if (u < cum) {
          pick = i;
          break;
        }
      }
      tokens.push_back(words_[pick].first);
    }
    if (tokens.size() > config.max_length) tokens.resize(config.max_length);
    out.push_back(join(tokens, " "));
  }
  return out;
}

RuleChatCompleter::RuleChatCompleter(std::map<std::string, double> lexicon,
                                     std::vector<std::string> neutral_words)
    : lexicon_(std::move(lexicon)), neutral_(std::move(neutral_words)) {
  if (neutral_.empty())
    throw Error(ErrorCode::kInvalidArgument, "rule chat needs neutral words");
}

std::string RuleChatCompleter::complete(std::string_view instruction,
                                        std::string_view input) {
  const auto& lex = lexicon_.lexicon();
  auto is_toxic_token = [&](const std::string& tok) {
    auto it = lex.find(normalize_token(tok));
    return it != lex.end() && is_toxic_score(it->second);
  };
  const std::uint64_t h = fnv1a64(input);
  if (instruction == prompts::kDetection) {
    return is_toxic_score(lexicon_.score(input)) ? "Toxic." : "Non-toxic.";
  }
  if (instruction == prompts::kMasking) {
    std::vector<std::string> out;
    for (const auto& t : token_strings(input)) {
      if (is_toxic_token(t)) {
        if (out.empty() || out.back() != kApiPlaceholder)
          out.emplace_back(kApiPlaceholder);
      } else {
        out.push_back(t);
      }
    }
    return join(out, " ");
  }
  if (instruction == prompts::kFilling) {
    std::mt19937_64 rng(h);
    std::string s(input);
    std::string out;
    std::size_t pos = 0;
    for (std::size_t hit = s.find(kApiPlaceholder); hit != std::string::npos;
         hit = s.find(kApiPlaceholder, pos)) {
      out += s.substr(pos, hit - pos);
      out += neutral_[rng() % neutral_.size()];
      pos = hit + kApiPlaceholder.size();
    }
    out += s.substr(pos);
    return out;
  }
  if (instruction == prompts::kContext) {
    auto tokens = token_strings(input);
    if (tokens.size() < 3) return "No, the prompt is too short to continue.";
    if (tokens.size() > 100) tokens.resize(100);
    std::mt19937_64 rng(h);
    while (tokens.size() < 24) tokens.push_back(neutral_[rng() % neutral_.size()]);
    return join(tokens, " ");
  }
  return std::string(input);
}

std::string ChatMaskFiller::fill(std::string_view masked, std::string_view placeholder,
                                 std::uint64_t) {
  std::string api_masked = replace_all(masked, placeholder, kApiPlaceholder);
  std::string answer = chat_.complete(prompts::kFilling, api_masked);
  return replace_all(answer, kApiPlaceholder, placeholder);
}

const std::vector<std::string>& default_neutral_words() {
  static const std::vector<std::string> words = {
      "friend", "garden", "morning", "river",  "music",  "book",
      "window", "coffee", "bright",  "gentle", "travel", "story",
      "city",   "quiet",  "sunny",   "table",  "letter", "simple"};
  return words;
}

const std::map<std::string, double>& default_mock_lexicon() {
  static const std::map<std::string, double> lex = {
      {"idiot", 0.92}, {"stupid", 0.81}, {"moron", 0.88},
      {"damn", 0.55},  {"shit", 0.86},   {"fucking", 0.97}};
  return lex;
}

}  // namespace detox
