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

#include <string_view>

namespace detox::prompts {

// Instructions issued to a chat backend for designed-prompt construction.
inline constexpr std::string_view kDetection =
    "Judge if the given text contains toxicity.";
inline constexpr std::string_view kMasking =
    "Find and mask the toxic portions of the given text with \"[MASK]\" token, "
    "and return the masked text without any extra context or explanation.";
inline constexpr std::string_view kFilling =
    "Replace \"[MASK]\" token with suitable tokens to make the recovered prompt "
    "friendly and non-toxic.";
inline constexpr std::string_view kContext =
    "Judge whether the prompt has sufficient context information for continual "
    "generation. Return the continuation if it has sufficient context, else "
    "return \"no\" with an explanation.";

}  // namespace detox::prompts
