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

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "detox/json.hpp"

namespace detox {

enum class ChainBranch {
  kToxicWithCont,
  kToxicNoCont,
  kNonToxicWithCont,
  kNonToxicNoCont,
};

inline constexpr std::array<ChainBranch, 4> kAllBranches = {
    ChainBranch::kToxicWithCont, ChainBranch::kToxicNoCont,
    ChainBranch::kNonToxicWithCont, ChainBranch::kNonToxicNoCont};

ChainBranch branch_for(bool is_toxic, bool has_context);
bool branch_is_toxic(ChainBranch branch);
bool branch_has_context(ChainBranch branch);
std::string_view branch_name(ChainBranch branch);
std::optional<ChainBranch> branch_from_name(std::string_view name);

struct DetoxChainRecord {
  std::string id;
  std::string prompt;
  bool is_toxic = false;
  std::optional<std::string> masked_prompt;
  std::optional<std::string> rephrased_prompt;
  bool has_context = false;
  std::optional<std::string> continuation;
  ChainBranch branch = ChainBranch::kNonToxicNoCont;

  bool operator==(const DetoxChainRecord&) const = default;
};

// Phrases that open each reasoning step. The fill phrase embeds the
// placeholder literal.
struct ChainMarkers {
  std::string start;
  std::string verdict_toxic;
  std::string verdict_non_toxic;
  std::string mask_intro;
  std::string fill_intro;
  std::string context_toxic;
  std::string context_non_toxic;
  std::string no_context_toxic;
  std::string no_context_non_toxic;
  std::string continuation;
};

struct TemplateSet {
  std::string delimiter = "###";
  std::string placeholder = std::string(kPlaceholderDefault);
  ChainMarkers markers;
  // Indexed by ChainBranch. Slots: {Prompt} {Masked Prompt}
  // {Rephrased Prompt} {Generation}.
  std::array<std::string, 4> templates;

  static constexpr std::string_view kPlaceholderDefault = "<MASK>";

  static TemplateSet defaults(std::string_view placeholder = kPlaceholderDefault);

  const std::string& for_branch(ChainBranch b) const {
    return templates[static_cast<std::size_t>(b)];
  }
};

struct Violation {
  std::string field;
  std::string message;

  bool operator==(const Violation&) const = default;
};

std::vector<Violation> validate_record(const DetoxChainRecord& record);

// Throws Error(kInvalidRecord) when the record breaks its branch invariants
// or a slot contains the delimiter.
std::string render_chain(const DetoxChainRecord& record,
                         const TemplateSet& templates = TemplateSet::defaults());

enum class ParseMode { kStrict, kLenient };

enum class DiagnosticKind {
  kMismatch,
  kMissingMarker,
  kDuplicateMarker,
  kOutOfOrder,
  kContradiction,
  kMissingSlot,
};

std::string_view diagnostic_kind_name(DiagnosticKind kind);

struct ParseDiagnostic {
  DiagnosticKind kind = DiagnosticKind::kMismatch;
  std::size_t position = 0;
  std::string expected;
  std::string found;
};

// Whatever steps could be recovered from a chain, present or not.
struct PartialChain {
  std::optional<std::string> prompt;
  std::optional<bool> is_toxic;
  std::optional<std::string> masked_prompt;
  std::optional<std::string> rephrased_prompt;
  std::optional<bool> has_context;
  std::optional<std::string> continuation;
};

struct ChainParseResult {
  std::optional<DetoxChainRecord> record;
  PartialChain partial;
  std::vector<ParseDiagnostic> diagnostics;
  bool complete = false;
};

ChainParseResult parse_chain(std::string_view text,
                             const TemplateSet& templates = TemplateSet::defaults(),
                             ParseMode mode = ParseMode::kStrict);

// Inverse of the chain corpus JSON-lines layout.
Json record_to_json(const DetoxChainRecord& record,
                              const TemplateSet& templates = TemplateSet::defaults());
DetoxChainRecord record_from_json(const Json& j);
Json parse_result_to_json(const ChainParseResult& result);

}  // namespace detox
