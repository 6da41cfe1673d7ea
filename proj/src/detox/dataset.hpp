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
#include <string>
#include <string_view>
#include <vector>

#include "detox/json.hpp"
#include "detox/pipeline.hpp"

namespace detox {

enum class SourceFormat { kRtpJsonl, kJigsawCsv };

SourceFormat source_format_from_name(std::string_view name);
std::string_view source_format_name(SourceFormat format);

struct SplitRatio {
  unsigned train = kTrainSplitParts;
  unsigned test = kTestSplitParts;
};

struct IngestReport {
  std::size_t rows = 0;
  std::size_t accepted = 0;
  std::size_t malformed = 0;
  std::size_t train = 0;
  std::size_t test = 0;

  Json to_json() const;
};

struct IngestResult {
  std::vector<PromptRecord> prompts;
  IngestReport report;
};

// Rows that fail to parse are skipped with a warning; more than 10% bad rows
// aborts with a parse error.
IngestResult ingest(const std::filesystem::path& source, SourceFormat format,
                    SplitRatio ratio = {}, std::uint64_t seed = 0);

// Deterministic shuffle-then-cut; assigns "train"/"test" in place.
void assign_split(std::vector<PromptRecord>& prompts, SplitRatio ratio, std::uint64_t seed);

// RFC 4180 reader. Quoted fields may span lines and escape quotes by
// doubling them.
std::vector<std::vector<std::string>> parse_csv(std::string_view data);

}  // namespace detox
