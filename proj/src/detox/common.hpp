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
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace detox {

enum class ErrorCode {
  kInvalidArgument = 1,
  kInvalidRecord,
  kParse,
  kEmptyInput,
  kShape,
  kLabeling,
  kScriptExhausted,
  kConfiguration,
  kService,
  kProtocol,
  kIo,
  kPrecondition,
  kAlignment,
  kMalformedFill,
  kCancelled,
  kInternal,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Values fixed by the Detox-Chain construction and evaluation protocol.
inline constexpr int kDefaultMaxIterations = 5;
inline constexpr double kDefaultSpanThreshold = 0.3;
inline constexpr std::size_t kDefaultSpanLength = 2;
inline constexpr double kDefaultTopP = 0.9;
inline constexpr double kDefaultTemperature = 1.0;
inline constexpr std::size_t kDefaultMaxLength = 512;
inline constexpr std::size_t kDefaultNumSamples = 25;
inline constexpr std::size_t kLengthFilterMin = 20;
inline constexpr std::size_t kLengthFilterMax = 128;
inline constexpr int kTrainSplitParts = 9;
inline constexpr int kTestSplitParts = 1;
inline constexpr double kToxicThreshold = 0.5;
inline constexpr double kToxicSpanAlpha = 2.0;
inline constexpr double kNonToxicSpanAlpha = 1.0;
inline constexpr std::string_view kInsufficientContextText =
    "##There is not enough context for the continual generation.";
inline constexpr std::string_view kDefaultPlaceholder = "<MASK>";
inline constexpr std::string_view kApiPlaceholder = "[MASK]";

inline bool is_toxic_score(double score) { return score >= kToxicThreshold; }

std::string_view version();

// Warnings from degraded paths (cache I/O, truncation) go through here.
using LogSink = std::function<void(std::string_view)>;
void set_log_sink(LogSink sink);
void log_warning(std::string_view message);

// splitmix64 finalizer; used to derive independent per-record seeds.
std::uint64_t fnv1a64(std::string_view text);

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0);

}  // namespace detox
