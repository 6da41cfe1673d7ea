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

#include "detox/common.hpp"

#include <iostream>
#include <mutex>

namespace detox {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kInvalidRecord: return "invalid_record";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kShape: return "shape_error";
    case ErrorCode::kLabeling: return "labeling_error";
    case ErrorCode::kScriptExhausted: return "script_exhausted";
    case ErrorCode::kConfiguration: return "configuration_error";
    case ErrorCode::kService: return "service_error";
    case ErrorCode::kProtocol: return "protocol_error";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kPrecondition: return "precondition_error";
    case ErrorCode::kAlignment: return "alignment_error";
    case ErrorCode::kMalformedFill: return "malformed_fill";
    case ErrorCode::kCancelled: return "cancelled";
    case ErrorCode::kInternal: return "internal_error";
  }
  return "unknown";
}

std::string_view version() { return DETOX_VERSION_STRING; }

namespace {
std::mutex g_log_mutex;
LogSink g_log_sink;
}  // namespace

void set_log_sink(LogSink sink) {
  std::lock_guard lock(g_log_mutex);
  g_log_sink = std::move(sink);
}

void log_warning(std::string_view message) {
  std::lock_guard lock(g_log_mutex);
  if (g_log_sink) {
    g_log_sink(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

namespace {
std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                       std::uint64_t c) {
  std::uint64_t h = splitmix(seed);
  h = splitmix(h ^ a);
  h = splitmix(h ^ b);
  return splitmix(h ^ c);
}

}  // namespace detox

namespace detox {
std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}
}  // namespace detox
