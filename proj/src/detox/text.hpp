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

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace detox {

// A whitespace-delimited token with its byte range in the source text.
struct Token {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const Token&) const = default;
};

std::vector<Token> tokenize(std::string_view text);
std::vector<std::string> token_strings(std::string_view text);
std::size_t count_tokens(std::string_view text);

// Lowercases ASCII and strips leading/trailing ASCII punctuation. A token
// made only of punctuation normalizes to its lowercased self.
std::string normalize_token(std::string_view token);

std::string to_lower(std::string_view text);
std::string_view trim(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with_icase(std::string_view text, std::string_view prefix);
std::size_t count_occurrences(std::string_view text, std::string_view needle);
std::string replace_all(std::string_view text, std::string_view from,
                        std::string_view to);

}  // namespace detox
