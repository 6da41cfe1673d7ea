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

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "detox/common.hpp"

namespace detox {

struct SamplingConfig {
  double top_p = kDefaultTopP;
  double temperature = kDefaultTemperature;
  std::size_t max_length = kDefaultMaxLength;
  std::size_t num_samples = kDefaultNumSamples;
  // Not a nucleus parameter; lets callers derive reproducible streams.
  std::uint64_t seed = 0;

  void validate() const;
};

class ToxicityOracle {
 public:
  virtual ~ToxicityOracle() = default;
  // Returns a score in [0,1].
  virtual double score(std::string_view text) = 0;
};

class SimilarityOracle {
 public:
  virtual ~SimilarityOracle() = default;
  // Returns a score in [-1,1].
  virtual double sim(std::string_view a, std::string_view b) = 0;
};

class PerplexityOracle {
 public:
  virtual ~PerplexityOracle() = default;
  virtual double ppl(std::string_view text) = 0;
};

class MaskFiller {
 public:
  virtual ~MaskFiller() = default;
  virtual std::string fill(std::string_view masked, std::string_view placeholder,
                           std::uint64_t seed) = 0;
};

class Generator {
 public:
  virtual ~Generator() = default;
  // Must return exactly config.num_samples texts.
  virtual std::vector<std::string> generate(std::string_view prompt,
                                            const SamplingConfig& config) = 0;
};

class ChatCompleter {
 public:
  virtual ~ChatCompleter() = default;
  virtual std::string complete(std::string_view instruction,
                               std::string_view input) = 0;
};

// Max lexicon score over whole-token, case-insensitive hits; 0 if none.
class LexiconToxicityOracle final : public ToxicityOracle {
 public:
  explicit LexiconToxicityOracle(std::map<std::string, double> lexicon);
  double score(std::string_view text) override;
  const std::map<std::string, double>& lexicon() const { return lexicon_; }

 private:
  std::map<std::string, double> lexicon_;
};

std::unique_ptr<ToxicityOracle> lexicon_toxicity_oracle(
    std::map<std::string, double> lexicon);

// Returns scores from a fixed list, one per call, then errors.
class ScriptedToxicityOracle final : public ToxicityOracle {
 public:
  explicit ScriptedToxicityOracle(std::vector<double> scores);
  double score(std::string_view text) override;
  std::size_t calls() const { return next_; }

 private:
  std::mutex mu_;
  std::vector<double> scores_;
  std::size_t next_ = 0;
};

class CountingToxicityOracle final : public ToxicityOracle {
 public:
  explicit CountingToxicityOracle(ToxicityOracle& inner) : inner_(inner) {}
  double score(std::string_view text) override {
    ++calls_;
    return inner_.score(text);
  }
  std::size_t calls() const { return calls_.load(); }

 private:
  ToxicityOracle& inner_;
  std::atomic<std::size_t> calls_{0};
};

std::string sha256_hex(std::string_view text);

// Memoizes scores by exact text bytes. With a cache path, entries persist as
// JSON-lines {"hash","text_len","score"} and are reloaded on construction.
class CachedToxicityOracle final : public ToxicityOracle {
 public:
  explicit CachedToxicityOracle(std::shared_ptr<ToxicityOracle> inner,
                                std::optional<std::filesystem::path> cache_path = {});
  double score(std::string_view text) override;

  std::size_t backend_calls() const { return backend_calls_.load(); }
  std::size_t size() const;
  bool persistent() const { return persistent_.load(); }

 private:
  struct Key {
    std::string hash;
    std::size_t text_len;
    bool operator<(const Key& o) const {
      return std::tie(hash, text_len) < std::tie(o.hash, o.text_len);
    }
  };
  void load();
  void append(const Key& key, double score);

  std::shared_ptr<ToxicityOracle> inner_;
  std::optional<std::filesystem::path> path_;
  mutable std::mutex mu_;
  std::map<Key, std::shared_future<double>> entries_;
  std::mutex file_mu_;
  std::atomic<bool> persistent_{false};
  std::atomic<std::size_t> backend_calls_{0};
};

std::unique_ptr<CachedToxicityOracle> cached(
    std::shared_ptr<ToxicityOracle> oracle,
    std::optional<std::filesystem::path> cache_path = {});

// Cosine similarity of normalized bag-of-words counts; 1.0 for two empty texts.
class BagOfWordsSimilarity final : public SimilarityOracle {
 public:
  double sim(std::string_view a, std::string_view b) override;
};

// Exact-match similarity: 1.0 if identical, else `mismatch`.
class ExactMatchSimilarity final : public SimilarityOracle {
 public:
  explicit ExactMatchSimilarity(double mismatch = 0.0) : mismatch_(mismatch) {}
  double sim(std::string_view a, std::string_view b) override {
    return a == b ? 1.0 : mismatch_;
  }

 private:
  double mismatch_;
};

// Add-one smoothed unigram perplexity over normalized tokens.
class UnigramPerplexity final : public PerplexityOracle {
 public:
  explicit UnigramPerplexity(const std::vector<std::string>& reference_texts);
  double ppl(std::string_view text) override;

 private:
  std::unordered_map<std::string, std::size_t> counts_;
  std::size_t total_ = 0;
};

// Looks the text up in a table; unknown texts get `fallback`.
class TablePerplexity final : public PerplexityOracle {
 public:
  TablePerplexity(std::map<std::string, double, std::less<>> table, double fallback)
      : table_(std::move(table)), fallback_(fallback) {}
  double ppl(std::string_view text) override;
  std::size_t calls() const { return calls_.load(); }

 private:
  std::map<std::string, double, std::less<>> table_;
  double fallback_;
  std::atomic<std::size_t> calls_{0};
};

class ScriptedGenerator final : public Generator {
 public:
  explicit ScriptedGenerator(std::vector<std::vector<std::string>> script);
  std::vector<std::string> generate(std::string_view prompt,
                                    const SamplingConfig& config) override;
  std::size_t calls() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::vector<std::string>> script_;
  std::size_t next_ = 0;
};

class ScriptedFiller final : public MaskFiller {
 public:
  explicit ScriptedFiller(std::vector<std::string> script);
  std::string fill(std::string_view masked, std::string_view placeholder,
                   std::uint64_t seed) override;
  std::size_t calls() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> script_;
  std::size_t next_ = 0;
};

struct ChatCall {
  std::string instruction;
  std::string input;
};

class ScriptedChatCompleter final : public ChatCompleter {
 public:
  explicit ScriptedChatCompleter(std::vector<std::string> script);
  std::string complete(std::string_view instruction, std::string_view input) override;
  std::vector<ChatCall> calls() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> script_;
  std::vector<ChatCall> calls_;
};

// Replaces every placeholder with a word drawn from `vocabulary` using a
// generator seeded per call.
class VocabularyFiller final : public MaskFiller {
 public:
  explicit VocabularyFiller(std::vector<std::string> vocabulary);
  std::string fill(std::string_view masked, std::string_view placeholder,
                   std::uint64_t seed) override;

 private:
  std::vector<std::string> vocabulary_;
};

// Echoes the prompt and extends it with words drawn by nucleus sampling from
// a fixed unigram distribution. Deterministic per (prompt, config.seed).
class NucleusUnigramGenerator final : public Generator {
 public:
  NucleusUnigramGenerator(std::vector<std::pair<std::string, double>> weighted_words,
                          std::size_t words_per_sample);
  std::vector<std::string> generate(std::string_view prompt,
                                    const SamplingConfig& config) override;

 private:
  std::vector<std::pair<std::string, double>> words_;
  std::size_t words_per_sample_;
};

// Returns the indices kept by nucleus (top-p) truncation of `probs` after
// temperature scaling, ordered by decreasing probability, plus their
// renormalized weights.
std::vector<std::pair<std::size_t, double>> nucleus_support(
    const std::vector<double>& weights, double top_p, double temperature);

// Offline stand-in for the designed-prompt LLM path. Answers the four
// designed prompts using a toxicity lexicon.
class RuleChatCompleter final : public ChatCompleter {
 public:
  RuleChatCompleter(std::map<std::string, double> lexicon,
                    std::vector<std::string> neutral_words);
  std::string complete(std::string_view instruction, std::string_view input) override;

 private:
  LexiconToxicityOracle lexicon_;
  std::vector<std::string> neutral_;
};

// Uses a chat backend with the designed fill prompt as a MaskFiller.
class ChatMaskFiller final : public MaskFiller {
 public:
  explicit ChatMaskFiller(ChatCompleter& chat) : chat_(chat) {}
  std::string fill(std::string_view masked, std::string_view placeholder,
                   std::uint64_t seed) override;

 private:
  ChatCompleter& chat_;
};

const std::vector<std::string>& default_neutral_words();
const std::map<std::string, double>& default_mock_lexicon();

}  // namespace detox
