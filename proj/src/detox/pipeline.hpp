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
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "detox/chain_codec.hpp"
#include "detox/json.hpp"
#include "detox/oracles.hpp"
#include "detox/span_model.hpp"

namespace detox {

struct PromptRecord {
  std::string id;
  std::string text;
  std::optional<double> toxicity;
  std::string split = "train";
};

struct MaskedText {
  std::string text;
  // Token ranges [first, last) of the source that each placeholder replaced.
  std::vector<std::pair<std::size_t, std::size_t>> masked_ranges;
  std::string placeholder;
};

struct PipelineConfig {
  std::size_t k = kDefaultSpanLength;
  double lambda = kDefaultSpanThreshold;
  int max_iterations = kDefaultMaxIterations;
  std::string placeholder = std::string(kDefaultPlaceholder);
  double sim_floor = 0.3;
  double ppl_ceiling = 100.0;
  std::size_t min_prompt_tokens = 3;
  std::size_t min_api_tokens = kLengthFilterMin;
  std::size_t max_api_tokens = kLengthFilterMax;
  SamplingConfig sampling;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const;
  Json to_json() const;
};

// Adjacent toxic spans merge into one run; each run becomes one placeholder.
MaskedText mask_toxic_spans(const SpanSegmentation& segmentation,
                            const std::vector<std::size_t>& toxic_indices,
                            std::string_view placeholder = kDefaultPlaceholder);

// Splices source token ranges back into the placeholders.
std::string unmask(const MaskedText& masked, const SpanSegmentation& segmentation);

struct IterativeResult {
  std::optional<std::string> text;
  int attempts = 0;
};

// Calls `produce` until it yields a candidate scoring < 0.5, at most K times.
// A produce call throwing kMalformedFill counts as a failed attempt.
IterativeResult iterative_generate(const std::function<std::string(int attempt)>& produce,
                                   ToxicityOracle& toxicity, int max_iterations);

std::optional<std::string> fulfill_spans(const MaskedText& masked, MaskFiller& filler,
                                         ToxicityOracle& toxicity, int max_iterations,
                                         std::uint64_t seed = 0, int* attempts = nullptr);

struct ContinuationResult {
  std::string continuation;
  bool has_context = false;
  int attempts = 0;
};

std::optional<ContinuationResult> continue_text(std::string_view prompt, Generator& generator,
                                                ToxicityOracle& toxicity,
                                                SimilarityOracle& similarity,
                                                PerplexityOracle& perplexity,
                                                const PipelineConfig& config,
                                                std::uint64_t seed = 0);

// 20 <= tokens <= 128 by default, boundaries inclusive.
bool filter_length(std::string_view text, std::size_t min_tokens = kLengthFilterMin,
                   std::size_t max_tokens = kLengthFilterMax);

struct Oracles {
  ToxicityOracle* toxicity = nullptr;
  SimilarityOracle* similarity = nullptr;
  PerplexityOracle* perplexity = nullptr;
  MaskFiller* filler = nullptr;
  Generator* generator = nullptr;
  ChatCompleter* chat = nullptr;
};

struct Discard {
  std::string id;
  std::string stage;
  std::string reason;
};

struct RecordOutcome {
  std::optional<DetoxChainRecord> record;
  std::optional<Discard> discard;
};

RecordOutcome build_chain_record(const PromptRecord& prompt, const SpanScorer& spans,
                                 const Oracles& oracles, const PipelineConfig& config,
                                 std::uint64_t record_seed);

struct RunReport {
  std::map<std::string, std::size_t> branch_counts;
  std::map<std::string, std::size_t> discards_by_stage;
  std::map<std::string, std::size_t> oracle_calls;
  std::vector<Discard> discards;
  std::size_t input_records = 0;
  std::size_t emitted_records = 0;
  bool aborted = false;
  std::string abort_reason;
  Json config_snapshot;
  std::uint64_t seed = 0;

  Json to_json() const;
};

struct PipelineResult {
  std::vector<DetoxChainRecord> records;
  RunReport report;
};

struct RunControl {
  const std::atomic<bool>* cancel = nullptr;
};

PipelineResult run_pipeline(const std::vector<PromptRecord>& prompts, const SpanScorer& spans,
                            const Oracles& oracles, const PipelineConfig& config,
                            RunControl control = {});

RecordOutcome build_chain_record_api(const PromptRecord& prompt, ChatCompleter& chat,
                                     ToxicityOracle& toxicity, const PipelineConfig& config);

PipelineResult run_api_pipeline(const std::vector<PromptRecord>& prompts, ChatCompleter& chat,
                                ToxicityOracle& toxicity, const PipelineConfig& config,
                                RunControl control = {});

enum class Verdict { kToxic, kNonToxic };
std::optional<Verdict> parse_toxicity_answer(std::string_view answer);

struct ContextAnswer {
  bool has_context = false;
  std::string continuation;
};
std::optional<ContextAnswer> parse_context_answer(std::string_view answer);

void write_corpus(std::ostream& out, const std::vector<DetoxChainRecord>& records,
                  const TemplateSet& templates);

std::vector<PromptRecord> read_prompts(const std::filesystem::path& path);
Json prompt_to_json(const PromptRecord& p);

}  // namespace detox
