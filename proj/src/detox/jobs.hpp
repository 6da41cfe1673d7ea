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
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "detox/config.hpp"
#include "detox/json.hpp"
#include "detox/pipeline.hpp"
#include "detox/remote.hpp"

namespace detox {

// Concrete oracles chosen by a RunConfig. Owns everything it hands out.
class OracleBundle {
 public:
  explicit OracleBundle(const RunConfig& config,
                        std::shared_ptr<HttpTransport> transport = nullptr);

  ToxicityOracle& toxicity() { return *toxicity_; }
  SimilarityOracle& similarity();
  PerplexityOracle& perplexity();
  MaskFiller& filler();
  Generator& generator();
  ChatCompleter& chat();

  // Only the interfaces that could be built; others stay null.
  Oracles view();

 private:
  const RunConfig& config_;
  std::shared_ptr<HttpTransport> transport_;
  std::shared_ptr<ToxicityOracle> toxicity_;
  std::unique_ptr<SimilarityOracle> similarity_;
  std::unique_ptr<PerplexityOracle> perplexity_;
  std::unique_ptr<MaskFiller> filler_;
  std::unique_ptr<Generator> generator_;
  std::unique_ptr<ChatCompleter> chat_;
  std::unique_ptr<ChatCompleter> filler_chat_;
};

// Provenance block embedded in every written artifact.
Json artifact_meta(const RunConfig& config);

struct JobOutcome {
  Json summary;
  // False when the run was cancelled or aborted; outputs then carry a
  // ".partial" suffix.
  bool complete = true;
  bool cancelled = false;
};

inline constexpr const char* kJobCommands[] = {
    "ingest", "build-chains", "build-chains-api", "train-span", "detect",
    "evaluate", "grade-chains", "parse-chain"};

// `args` carries command inputs that are not part of the run config, e.g.
// {"text": ...} for detect and parse-chain, {"gold": path} for grade-chains.
JobOutcome run_job(std::string_view command, const RunConfig& config, const Json& args,
                   const std::atomic<bool>* cancel = nullptr,
                   std::shared_ptr<HttpTransport> transport = nullptr);

}  // namespace detox
