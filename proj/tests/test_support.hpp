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

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "detox/chain_codec.hpp"
#include "detox/json.hpp"
#include "detox/oracles.hpp"
#include "detox/pipeline.hpp"

namespace detox::testing {

inline std::string fixture_path(const std::string& rel) {
  return std::string(DETOX_FIXTURE_DIR) + "/" + rel;
}

inline std::string read_fixture(const std::string& rel) {
  std::ifstream in(fixture_path(rel), std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CaseStudy {
  std::string name;
  std::string text;
  ChainBranch expected_branch;
  bool contradiction = false;
};

inline std::vector<CaseStudy> load_case_studies() {
  std::vector<CaseStudy> out;
  std::ifstream in(fixture_path("case_studies.jsonl"));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const Json j = Json::parse(line);
    out.push_back({j.at("name").get<std::string>(), j.at("text").get<std::string>(),
                   *branch_from_name(j.at("expected_branch").get<std::string>()),
                   j.at("contradiction").get<bool>()});
  }
  return out;
}

// Random slot text mixing words with punctuation and unicode, but never
// the delimiter.
inline std::string random_slot(std::mt19937_64& rng, bool allow_empty = true) {
  static const std::vector<std::string> pieces = {
      "the", "cat", "Let's", "toxic", "step", "MASK", "<MASK>", "#", "##", ",", ".", "\"",
      "é", "\u2014", "日本", "  ", "\t", "x", "The text is", "context", ":", "1", "'"};
  std::uniform_int_distribution<int> len(allow_empty ? 0 : 1, 8);
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
  std::string s;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) {
    const std::string& p = pieces[pick(rng)];
    // Keep '#' runs from forming the delimiter.
    if (p[0] == '#' && !s.empty() && s.back() == '#') s += ' ';
    s += p;
    if (rng() % 2) s += ' ';
  }
  while (s.find("###") != std::string::npos) s.replace(s.find("###"), 3, "# #");
  return s;
}

inline DetoxChainRecord random_record(std::mt19937_64& rng, ChainBranch branch) {
  DetoxChainRecord r;
  r.branch = branch;
  r.is_toxic = branch == ChainBranch::kToxicWithCont || branch == ChainBranch::kToxicNoCont;
  r.has_context = branch == ChainBranch::kToxicWithCont || branch == ChainBranch::kNonToxicWithCont;
  r.prompt = random_slot(rng);
  if (r.is_toxic) {
    r.masked_prompt = random_slot(rng);
    r.rephrased_prompt = random_slot(rng);
  }
  if (r.has_context) r.continuation = random_slot(rng);
  return r;
}

// Deterministic offline oracles matching the CLI's mock backends.
struct MockWorld {
  LexiconToxicityOracle toxicity{default_mock_lexicon()};
  BagOfWordsSimilarity similarity;
  UnigramPerplexity perplexity{default_neutral_words()};
  VocabularyFiller filler{default_neutral_words()};
  NucleusUnigramGenerator generator{uniform_words(), 8};

  static std::vector<std::pair<std::string, double>> uniform_words() {
    std::vector<std::pair<std::string, double>> w;
    for (const auto& s : default_neutral_words()) w.emplace_back(s, 1.0);
    return w;
  }
  Oracles view() { return {&toxicity, &similarity, &perplexity, &filler, &generator, nullptr}; }
};

// n prompts of 4-9 filler words; the first n_toxic (shuffled into place)
// carry one lexicon word.
inline std::vector<PromptRecord> synthetic_prompts(std::size_t n, std::size_t n_toxic,
                                                   std::uint64_t seed) {
  static const std::vector<std::string> words = {
      "the", "people", "in", "this", "town", "said", "that", "we", "should", "all",
      "go", "to", "park", "after", "work", "because", "weather", "is", "nice", "today"};
  std::vector<std::string> bad;
  for (const auto& [w, s] : default_mock_lexicon())
    if (s >= 0.5) bad.push_back(w);
  std::mt19937_64 rng(seed);
  std::vector<bool> toxic(n, false);
  for (std::size_t i = 0; i < n_toxic; ++i) toxic[i] = true;
  std::shuffle(toxic.begin(), toxic.end(), rng);
  std::vector<PromptRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = 4 + rng() % 6;
    std::vector<std::string> t;
    for (std::size_t w = 0; w < len; ++w) t.push_back(words[rng() % words.size()]);
    if (toxic[i]) t.insert(t.begin() + static_cast<std::ptrdiff_t>(rng() % (len + 1)), bad[rng() % bad.size()]);
    PromptRecord p;
    p.id = "p" + std::to_string(i);
    for (std::size_t w = 0; w < t.size(); ++w) p.text += (w ? " " : "") + t[w];
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace detox::testing
