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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "detox/common.hpp"
#include "detox/json.hpp"
#include "detox/text.hpp"

namespace detox {

class ToxicityOracle;

struct Span {
  std::size_t start = 0;  // token index
  std::size_t end = 0;    // exclusive
  std::string text;       // source substring covering the tokens

  bool operator==(const Span&) const = default;
};

struct SpanSegmentation {
  std::string text;
  std::vector<Token> tokens;
  std::size_t k = kDefaultSpanLength;
  std::vector<Span> spans;
};

// Non-overlapping k-token windows; a shorter remainder span is kept.
SpanSegmentation segment_spans(std::string_view text, std::size_t k = kDefaultSpanLength);

struct SpanScoreVector {
  std::vector<double> scores;
  std::size_t k = kDefaultSpanLength;
  double lambda = kDefaultSpanThreshold;
};

// {i : scores[i] >= lambda}, ascending.
std::vector<std::size_t> detect_toxic_spans(std::span<const double> scores,
                                            double lambda = kDefaultSpanThreshold);
std::vector<std::size_t> detect_toxic_spans(const SpanScoreVector& v);

struct ScoredText {
  double global = 0.0;
  SpanScoreVector spans;
  SpanSegmentation segmentation;
  bool truncated = false;
};

// Anything that produces global + per-span toxicity for a text.
class SpanScorer {
 public:
  virtual ~SpanScorer() = default;
  virtual ScoredText score(std::string_view text) const = 0;
  virtual std::size_t span_length() const = 0;
  virtual double threshold() const = 0;
};

// Scores each span surface text (and the whole text) with a toxicity
// oracle. Used when no trained model is available.
class OracleSpanScorer final : public SpanScorer {
 public:
  OracleSpanScorer(ToxicityOracle& oracle, std::size_t k = kDefaultSpanLength,
                   double lambda = kDefaultSpanThreshold);
  ScoredText score(std::string_view text) const override;
  std::size_t span_length() const override { return k_; }
  double threshold() const override { return lambda_; }

 private:
  ToxicityOracle& oracle_;
  std::size_t k_;
  double lambda_;
};

struct SpanCnnConfig {
  std::size_t k = kDefaultSpanLength;
  double lambda = kDefaultSpanThreshold;
  std::size_t embed_dim = 16;
  std::size_t context_dim = 16;
  std::size_t conv_channels = 16;
  std::size_t ffn_dim = 16;
  std::size_t max_tokens = kDefaultMaxLength;
  std::string tokenizer_id = "whitespace-lower-v1";

  void validate() const;
};

// Raw logits from one forward pass.
struct SpanCnnOutputs {
  double global_logit = 0.0;
  std::vector<double> span_logits;
};

struct SpanTrainingSample {
  std::string text;
  double global_label = 0.0;
  std::vector<double> span_labels;
  std::vector<double> span_weights;
};

struct LossBreakdown {
  double total = 0.0;
  double global_term = 0.0;
  double span_term = 0.0;
};

enum class LabelMode { kSoft, kBinarized };

// Two-class cross-entropy of sigmoid(logit) against [target, 1 - target].
double soft_cross_entropy(double logit, double target);
double sigmoid(double x);

// Joint loss: CE(global) + sum_i alpha_i * CE(span_i).
LossBreakdown compute_loss(const SpanCnnOutputs& outputs, const SpanTrainingSample& sample,
                           LabelMode mode = LabelMode::kSoft);

struct AlphaPolicy {
  double toxic = kToxicSpanAlpha;
  double non_toxic = kNonToxicSpanAlpha;
  double toxic_label_threshold = kToxicThreshold;

  double weight(double label) const {
    return label >= toxic_label_threshold ? toxic : non_toxic;
  }
};

struct ToxicSpan {
  std::string text;
  double toxicity = 1.0;
};

// With probability `rate`, inserts one bank span at a random token boundary
// and relabels: each token inherits its old span label (inserted tokens get
// the bank toxicity), and each new span takes the max over its tokens.
SpanTrainingSample augment_with_toxic_spans(const SpanTrainingSample& sample,
                                            std::span<const ToxicSpan> bank, double rate,
                                            std::mt19937_64& rng, std::size_t k,
                                            const AlphaPolicy& alpha = {});

enum class InitMode { kRandom, kZeroHeads };

class SpanCnnModel final : public SpanScorer {
 public:
  SpanCnnModel(SpanCnnConfig config, std::vector<std::string> vocabulary,
               std::uint64_t seed, InitMode init = InitMode::kRandom);

  ScoredText score(std::string_view text) const override;
  std::size_t span_length() const override { return config_.k; }
  double threshold() const override { return config_.lambda; }

  SpanCnnOutputs forward(std::string_view text) const;
  // Loss and gradient w.r.t. every parameter, accumulated into `grad`.
  LossBreakdown loss_and_gradient(const SpanTrainingSample& sample, std::span<double> grad,
                                  LabelMode mode = LabelMode::kSoft) const;

  const SpanCnnConfig& config() const { return config_; }
  const std::vector<std::string>& vocabulary() const { return vocab_; }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  Json to_json() const;
  static SpanCnnModel from_json(const Json& j);
  void save(const std::filesystem::path& path) const;
  // expected_k, when set, must match the checkpoint's span length.
  static SpanCnnModel load(const std::filesystem::path& path,
                           std::optional<std::size_t> expected_k = {});

 private:
  struct Layout {
    std::size_t embedding, ctx_w, ctx_b, global_w, global_b, conv_w, conv_b, ffn_w, ffn_b,
        out_w, out_b, total;
  };
  struct Activations;

  void build_layout();
  std::vector<std::size_t> token_ids(const std::vector<Token>& tokens) const;
  void run_forward(const std::vector<std::size_t>& ids, std::size_t n_spans,
                   Activations& act) const;

  SpanCnnConfig config_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::size_t> index_;
  Layout layout_{};
  std::vector<double> params_;
};

struct SpanTrainConfig {
  SpanCnnConfig model;
  AlphaPolicy alpha;
  LabelMode label_mode = LabelMode::kSoft;
  double augmentation_rate = 0.0;
  std::vector<ToxicSpan> span_bank;
  std::uint64_t seed = 0;
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  double learning_rate = 0.02;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double holdout_fraction = 0.0;
};

// Training corpus line; missing labels are filled from an oracle.
struct SpanCorpusItem {
  std::string text;
  std::optional<double> global_label;
  std::optional<std::vector<double>> span_labels;
};

struct SpanAccuracy {
  double span_exact = 0.0;     // per text: predicted toxic set == gold set
  double span_per_unit = 0.0;  // per span: (s_i >= lambda) == (label >= 0.5)
  double instance = 0.0;       // (global >= 0.5) == (label >= 0.5)
  std::size_t samples = 0;
};

struct SpanTrainReport {
  std::vector<double> epoch_losses;
  std::size_t train_samples = 0;
  std::optional<SpanAccuracy> holdout;
};

struct SpanTrainResult {
  SpanCnnModel model;
  SpanTrainReport report;
};

// Turns corpus items into labeled samples for span length k, labelling
// missing fields with `oracle` (kLabeling error if needed and absent).
std::vector<SpanTrainingSample> label_corpus(const std::vector<SpanCorpusItem>& corpus,
                                             std::size_t k, const AlphaPolicy& alpha,
                                             ToxicityOracle* oracle);

SpanTrainResult train_span_cnn(const std::vector<SpanCorpusItem>& corpus,
                               const SpanTrainConfig& config,
                               ToxicityOracle* oracle = nullptr);

SpanAccuracy evaluate_span_model(const SpanScorer& model,
                                 const std::vector<SpanTrainingSample>& samples);

std::vector<SpanCorpusItem> read_span_corpus(const std::filesystem::path& path);

}  // namespace detox
