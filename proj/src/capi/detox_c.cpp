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

#include "detox/detox.h"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <string>

#include "detox/chain_codec.hpp"
#include "detox/common.hpp"
#include "detox/config.hpp"
#include "detox/evaluation.hpp"
#include "detox/jobs.hpp"
#include "detox/span_model.hpp"

struct detox_span_model {
  detox::SpanCnnModel model;
};

namespace {

thread_local std::string g_last_error;
thread_local std::string g_last_error_json;
std::atomic<bool> g_cancel{false};
static_assert(std::atomic<bool>::is_always_lock_free);

void clear_error() {
  g_last_error.clear();
  g_last_error_json.clear();
}

detox_status set_error(detox::ErrorCode code, const std::string& message) {
  g_last_error = message;
  detox::Json j{{"error", std::string(detox::error_code_name(code))},
                {"code", static_cast<int>(code)},
                {"message", message}};
  g_last_error_json = j.dump();
  return static_cast<detox_status>(code);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename F>
detox_status guarded(F&& body) {
  clear_error();
  try {
    return body();
  } catch (const detox::Error& e) {
    return set_error(e.code(), e.what());
  } catch (const nlohmann::json::exception& e) {
    return set_error(detox::ErrorCode::kParse, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(detox::ErrorCode::kInternal, "out of memory");
  } catch (const std::exception& e) {
    return set_error(detox::ErrorCode::kInternal, e.what());
  } catch (...) {
    return set_error(detox::ErrorCode::kInternal, "unknown failure");
  }
}

void require(const void* p, const char* what) {
  if (!p) throw detox::Error(detox::ErrorCode::kInvalidArgument, std::string(what) + " is NULL");
}

detox::Json parse_optional_json(const char* text, const char* what) {
  if (!text || !*text) return detox::Json::object();
  try {
    return detox::Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw detox::Error(detox::ErrorCode::kInvalidArgument,
                       std::string(what) + " is not valid JSON: " + e.what());
  }
}

detox::RunConfig resolve(const char* config_path, const char* overrides_json) {
  std::optional<std::filesystem::path> file;
  if (config_path && *config_path) file = config_path;
  return detox::load_run_config(file, parse_optional_json(overrides_json, "overrides"));
}

}  // namespace

extern "C" {

const char* detox_version(void) {
  static const std::string v(detox::version());
  return v.c_str();
}

const char* detox_status_name(detox_status status) {
  if (status == DETOX_OK) return "ok";
  if (status < DETOX_E_INVALID_ARGUMENT || status > DETOX_E_INTERNAL) return "unknown";
  return detox::error_code_name(static_cast<detox::ErrorCode>(status)).data();
}

const char* detox_last_error(void) { return g_last_error.c_str(); }
const char* detox_last_error_json(void) { return g_last_error_json.c_str(); }

void detox_string_free(char* s) { std::free(s); }

detox_status detox_render_chain(const char* record_json, const char* placeholder,
                                char** out_text) {
  return guarded([&] {
    require(record_json, "record_json");
    require(out_text, "out_text");
    const auto templates = detox::TemplateSet::defaults(
        placeholder ? std::string_view(placeholder) : detox::kDefaultPlaceholder);
    const auto record = detox::record_from_json(detox::Json::parse(record_json));
    *out_text = dup_string(detox::render_chain(record, templates));
    return DETOX_OK;
  });
}

detox_status detox_parse_chain(const char* text, int lenient, const char* placeholder,
                               char** out_json) {
  return guarded([&] {
    require(text, "text");
    require(out_json, "out_json");
    const auto templates = detox::TemplateSet::defaults(
        placeholder ? std::string_view(placeholder) : detox::kDefaultPlaceholder);
    const auto result = detox::parse_chain(
        text, templates, lenient ? detox::ParseMode::kLenient : detox::ParseMode::kStrict);
    *out_json = dup_string(detox::parse_result_to_json(result).dump());
    return DETOX_OK;
  });
}

detox_status detox_span_model_load(const char* path, size_t expected_k, detox_span_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    std::optional<std::size_t> k;
    if (expected_k) k = expected_k;
    *out = new detox_span_model{detox::SpanCnnModel::load(path, k)};
    return DETOX_OK;
  });
}

void detox_span_model_free(detox_span_model* model) { delete model; }

size_t detox_span_model_k(const detox_span_model* model) {
  return model ? model->model.span_length() : 0;
}

detox_status detox_span_model_score(const detox_span_model* model, const char* text,
                                    double lambda, char** out_json) {
  return guarded([&] {
    require(model, "model");
    require(text, "text");
    require(out_json, "out_json");
    auto scored = model->model.score(text);
    if (lambda >= 0.0) scored.spans.lambda = lambda;
    detox::Json spans = detox::Json::array();
    for (std::size_t i = 0; i < scored.segmentation.spans.size(); ++i)
      spans.push_back({{"index", i},
                       {"text", scored.segmentation.spans[i].text},
                       {"score", scored.spans.scores[i]}});
    detox::Json j{{"global", scored.global},
                  {"spans", std::move(spans)},
                  {"toxic_spans", detox::detect_toxic_spans(scored.spans)},
                  {"truncated", scored.truncated}};
    *out_json = dup_string(j.dump());
    return DETOX_OK;
  });
}

detox_status detox_edit_distance(const char* a, const char* b, int char_mode, size_t* out) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(out, "out");
    *out = detox::edit_distance(a, b, char_mode ? detox::EditMode::kChar : detox::EditMode::kToken);
    return DETOX_OK;
  });
}

detox_status detox_config_resolve(const char* config_path, const char* overrides_json,
                                  char** out_json) {
  return guarded([&] {
    require(out_json, "out_json");
    *out_json = dup_string(resolve(config_path, overrides_json).to_json().dump(2));
    return DETOX_OK;
  });
}

detox_status detox_run_command(const char* command, const char* config_path,
                               const char* overrides_json, const char* args_json,
                               char** out_json) {
  return guarded([&] {
    require(command, "command");
    require(out_json, "out_json");
    *out_json = nullptr;
    const auto config = resolve(config_path, overrides_json);
    const auto args = parse_optional_json(args_json, "args");
    auto outcome = detox::run_job(command, config, args, &g_cancel);
    *out_json = dup_string(outcome.summary.dump(2));
    if (outcome.complete) return DETOX_OK;
    const std::string reason = outcome.summary.value("abort_reason", std::string("run aborted"));
    return set_error(outcome.cancelled ? detox::ErrorCode::kCancelled : detox::ErrorCode::kService,
                     reason);
  });
}

void detox_request_cancel(void) { g_cancel.store(true); }
void detox_reset_cancel(void) { g_cancel.store(false); }

}  // extern "C"
