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

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "detox/chain_codec.hpp"
#include "detox/json.hpp"
#include "detox/oracles.hpp"

namespace detox {

struct GenerationSample {
  std::string text;
  double toxicity = 0.0;
};

struct GenerationBatch {
  std::string prompt_id;
  std::string prompt;
  std::vector<GenerationSample> samples;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

// Compensated summation so that means do not depend on input order beyond
// rounding of the final division.
double stable_sum(const std::vector<double>& values);
double stable_mean(const std::vector<double>& values);
// Population standard deviation.
MeanStd mean_std(const std::vector<double>& values);

std::string format_mean_std(const MeanStd& v, int digits = 2);

MeanStd expected_max_toxicity(const std::vector<GenerationBatch>& batches);
double toxicity_probability(const std::vector<GenerationBatch>& batches,
                            double threshold = kToxicThreshold);

enum class EditMode { kToken, kChar };

std::size_t edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b);
std::size_t edit_distance(std::string_view a, std::string_view b, EditMode mode = EditMode::kToken);

// argmin_i ppl(text + " " + choices[i]); ties go to the lowest index.
std::size_t ppl_choice_classify(std::string_view text, const std::vector<std::string>& choices,
                                PerplexityOracle& ppl);

enum class ExemplarLabel { kGood, kBad };
std::string_view exemplar_label_name(ExemplarLabel label);

struct Exemplar {
  std::string text;
  ExemplarLabel label = ExemplarLabel::kGood;
};

std::string build_incontext_prompt(const std::vector<Exemplar>& exemplars, std::string_view query);

struct SubsetMetrics {
  std::size_t prompts = 0;
  MeanStd exp_max_toxicity;
  double toxicity_prob = 0.0;
  double sim = 0.0;
  double edit = 0.0;
  double ppl = 0.0;
};

inline constexpr std::string_view kSubsetFull = "Full";
inline constexpr std::string_view kSubsetToxic = "Toxic";
inline constexpr std::string_view kSubsetNonToxic = "Non-Toxic";

struct EvalReport {
  std::map<std::string, SubsetMetrics> subsets;
  EditMode edit_mode = EditMode::kToken;

  const SubsetMetrics& full() const { return subsets.at(std::string(kSubsetFull)); }
  Json to_json() const;
  std::string to_table() const;
};

struct EvalOptions {
  EditMode edit_mode = EditMode::kToken;
  // 0 disables the per-batch sample count check.
  std::size_t expected_samples = 0;
  double threshold = kToxicThreshold;
};

// Prompts without a gold label only contribute to Full.
EvalReport evaluate_generations(const std::vector<GenerationBatch>& batches,
                                const std::map<std::string, double>& gold_toxicity,
                                SimilarityOracle& sim, PerplexityOracle& ppl,
                                const EvalOptions& options = {});

// Fraction of values strictly above 0.5.
double expected_sim_discrete(const std::vector<double>& sims);

// Indices of `original` tokens that do not survive into `masked`, by
// longest-common-subsequence alignment over whitespace tokens.
std::vector<std::size_t> masked_token_indices(std::string_view original, std::string_view masked);

struct ClassAccuracy {
  double toxic = 0.0;
  double non_toxic = 0.0;
  double average = 0.0;
  std::size_t toxic_total = 0;
  std::size_t non_toxic_total = 0;
};

struct StageMetrics {
  std::size_t count = 0;
  double expected_sim_discrete = 0.0;
  double toxicity_mean = 0.0;
};

struct MaskingMetrics {
  std::size_t count = 0;
  double edit_mean = 0.0;
  double toxicity_mean = 0.0;
};

struct StepReport {
  std::size_t samples = 0;
  ClassAccuracy instance;
  double span_accuracy = 0.0;
  double span_f1 = 0.0;
  MaskingMetrics masking;
  StageMetrics fulfilling;
  StageMetrics continuation;

  Json to_json() const;
};

struct GradedOutput {
  std::string id;
  ChainParseResult parsed;
};

StepReport evaluate_chain_steps(const std::vector<GradedOutput>& outputs,
                                const std::vector<DetoxChainRecord>& gold,
                                ToxicityOracle& toxicity, SimilarityOracle& sim);

struct GenerationFile {
  std::vector<GenerationBatch> batches;
  std::map<std::string, double> gold_toxicity;
};

// JSON-lines {"prompt_id","prompt","samples":[{"text","toxicity"}]}; an
// optional "gold_toxicity" per line fills the gold map.
GenerationFile read_generations(const std::filesystem::path& path);

}  // namespace detox
