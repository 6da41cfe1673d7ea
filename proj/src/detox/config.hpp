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

#include "detox/dataset.hpp"
#include "detox/json.hpp"
#include "detox/pipeline.hpp"
#include "detox/remote.hpp"
#include "detox/span_model.hpp"

namespace detox {

enum class OracleKind { kMock, kRemote };

OracleKind oracle_kind_from_name(std::string_view name);
std::string_view oracle_kind_name(OracleKind kind);

struct OracleSelection {
  OracleKind toxicity = OracleKind::kMock;
  OracleKind similarity = OracleKind::kMock;
  OracleKind perplexity = OracleKind::kMock;
  OracleKind filler = OracleKind::kMock;
  OracleKind generator = OracleKind::kMock;
  OracleKind chat = OracleKind::kMock;
};

struct RunPaths {
  std::string input;
  std::string output;
  std::string cache;
  std::string model;
  std::string report;
};

struct RemoteSettings {
  std::string toxicity_endpoint = RemoteToxicityOptions{}.endpoint;
  std::string llm_endpoint = RemoteLlmOptions{}.endpoint;
  std::string llm_model = RemoteLlmOptions{}.model;  // completions
  std::string chat_model = "gpt-3.5-turbo";
  double requests_per_second = 1.0;
  int max_retries = RetryPolicy{}.max_retries;
};

struct TrainSettings {
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  double learning_rate = 0.02;
  double augmentation_rate = 0.0;
  double holdout_fraction = 0.1;
  double toxic_alpha = kToxicSpanAlpha;
  double non_toxic_alpha = kNonToxicSpanAlpha;
  LabelMode label_mode = LabelMode::kSoft;
  std::size_t embed_dim = 16;
  std::size_t context_dim = 16;
  std::size_t conv_channels = 16;
  std::size_t ffn_dim = 16;
};

struct RunConfig {
  std::uint64_t seed = 0;
  RunPaths paths;
  OracleSelection oracles;
  PipelineConfig pipeline;
  SplitRatio split;
  TrainSettings train;
  RemoteSettings remote;
  std::map<std::string, double> mock_lexicon = default_mock_lexicon();
  std::string source_format = "rtp-jsonl";

  void validate() const;
  Json to_json() const;
  static RunConfig from_json(const Json& j);

  SpanTrainConfig span_train_config() const;
};

// Defaults, then the file (if any), then `overrides`. Each layer is a JSON
// object merged key by key; a top-level "oracle" string sets every
// interface at once. Unknown keys are configuration errors.
RunConfig load_run_config(const std::optional<std::filesystem::path>& file,
                          const Json& overrides = Json::object());

}  // namespace detox
