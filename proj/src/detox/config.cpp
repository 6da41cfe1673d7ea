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

#include "detox/config.hpp"

#include <fstream>
#include <set>

namespace detox {

OracleKind oracle_kind_from_name(std::string_view name) {
  if (name == "mock") return OracleKind::kMock;
  if (name == "remote") return OracleKind::kRemote;
  throw Error(ErrorCode::kConfiguration, "oracle must be 'mock' or 'remote', got '" +
                                             std::string(name) + "'");
}

std::string_view oracle_kind_name(OracleKind kind) {
  return kind == OracleKind::kMock ? "mock" : "remote";
}

namespace {

constexpr const char* kOracleNames[] = {"toxicity", "similarity", "perplexity",
                                        "filler",   "generator",  "chat"};

OracleKind* oracle_slot(OracleSelection& s, std::string_view name) {
  if (name == "toxicity") return &s.toxicity;
  if (name == "similarity") return &s.similarity;
  if (name == "perplexity") return &s.perplexity;
  if (name == "filler") return &s.filler;
  if (name == "generator") return &s.generator;
  if (name == "chat") return &s.chat;
  return nullptr;
}

void merge(Json& base, const Json& patch, const std::string& where) {
  if (!patch.is_object())
    throw Error(ErrorCode::kConfiguration, "config section '" + where + "' must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string path = where.empty() ? it.key() : where + "." + it.key();
    if (!base.contains(it.key()))
      throw Error(ErrorCode::kConfiguration, "unknown config key '" + path + "'");
    Json& slot = base[it.key()];
    // The lexicon is replaced wholesale rather than merged.
    if (slot.is_object() && path != "mock_lexicon")
      merge(slot, it.value(), path);
    else
      slot = it.value();
  }
}

// Expands the "oracle" shorthand into the per-interface section.
Json expand_layer(Json layer) {
  if (!layer.is_object())
    throw Error(ErrorCode::kConfiguration, "config document must be a JSON object");
  if (auto it = layer.find("oracle"); it != layer.end()) {
    if (!it->is_string())
      throw Error(ErrorCode::kConfiguration, "'oracle' must be \"mock\" or \"remote\"");
    const std::string kind = it->get<std::string>();
    oracle_kind_from_name(kind);
    layer.erase(it);
    Json& o = layer["oracles"];
    if (o.is_null()) o = Json::object();
    for (const char* name : kOracleNames) o[name] = kind;
  }
  return layer;
}

template <typename T>
T get(const Json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfiguration, std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  pipeline.validate();
  if (split.train + split.test == 0)
    throw Error(ErrorCode::kConfiguration, "split ratio must not be 0:0");
  if (train.epochs == 0 || train.batch_size == 0)
    throw Error(ErrorCode::kConfiguration, "train.epochs and train.batch_size must be >= 1");
  if (!(train.learning_rate > 0.0))
    throw Error(ErrorCode::kConfiguration, "train.learning_rate must be > 0");
  if (!(train.augmentation_rate >= 0.0 && train.augmentation_rate <= 1.0))
    throw Error(ErrorCode::kConfiguration, "train.augmentation_rate must be in [0,1]");
  if (!(train.holdout_fraction >= 0.0 && train.holdout_fraction < 1.0))
    throw Error(ErrorCode::kConfiguration, "train.holdout_fraction must be in [0,1)");
  if (!(remote.requests_per_second > 0.0))
    throw Error(ErrorCode::kConfiguration, "remote.requests_per_second must be > 0");
  if (remote.max_retries < 0)
    throw Error(ErrorCode::kConfiguration, "remote.max_retries must be >= 0");
  source_format_from_name(source_format);
  for (const auto& [w, s] : mock_lexicon)
    if (!(s >= 0.0 && s <= 1.0))
      throw Error(ErrorCode::kConfiguration, "mock_lexicon score for '" + w + "' is outside [0,1]");
}

Json RunConfig::to_json() const {
  Json j;
  j["seed"] = seed;
  j["paths"] = {{"input", paths.input},
                {"output", paths.output},
                {"cache", paths.cache},
                {"model", paths.model},
                {"report", paths.report}};
  j["oracles"] = {{"toxicity", oracle_kind_name(oracles.toxicity)},
                  {"similarity", oracle_kind_name(oracles.similarity)},
                  {"perplexity", oracle_kind_name(oracles.perplexity)},
                  {"filler", oracle_kind_name(oracles.filler)},
                  {"generator", oracle_kind_name(oracles.generator)},
                  {"chat", oracle_kind_name(oracles.chat)}};
  Json p = pipeline.to_json();
  p.erase("seed");
  p.erase("sampling");
  j["pipeline"] = std::move(p);
  j["sampling"] = {{"top_p", pipeline.sampling.top_p},
                   {"temperature", pipeline.sampling.temperature},
                   {"max_length", pipeline.sampling.max_length},
                   {"num_samples", pipeline.sampling.num_samples}};
  j["split_ratio"] = Json::array({split.train, split.test});
  j["train"] = {{"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"learning_rate", train.learning_rate},
                {"augmentation_rate", train.augmentation_rate},
                {"holdout_fraction", train.holdout_fraction},
                {"toxic_alpha", train.toxic_alpha},
                {"non_toxic_alpha", train.non_toxic_alpha},
                {"label_mode", train.label_mode == LabelMode::kSoft ? "soft" : "binarized"},
                {"embed_dim", train.embed_dim},
                {"context_dim", train.context_dim},
                {"conv_channels", train.conv_channels},
                {"ffn_dim", train.ffn_dim}};
  j["remote"] = {{"toxicity_endpoint", remote.toxicity_endpoint},
                 {"llm_endpoint", remote.llm_endpoint},
                 {"llm_model", remote.llm_model},
                 {"chat_model", remote.chat_model},
                 {"requests_per_second", remote.requests_per_second},
                 {"max_retries", remote.max_retries}};
  j["mock_lexicon"] = Json::object();
  for (const auto& [w, s] : mock_lexicon) j["mock_lexicon"][w] = s;
  j["source_format"] = source_format;
  return j;
}

RunConfig RunConfig::from_json(const Json& j) {
  RunConfig c;
  c.seed = get<std::uint64_t>(j, "seed");
  const Json& paths = j.at("paths");
  c.paths.input = get<std::string>(paths, "input");
  c.paths.output = get<std::string>(paths, "output");
  c.paths.cache = get<std::string>(paths, "cache");
  c.paths.model = get<std::string>(paths, "model");
  c.paths.report = get<std::string>(paths, "report");
  const Json& o = j.at("oracles");
  for (const char* name : kOracleNames)
    *oracle_slot(c.oracles, name) = oracle_kind_from_name(get<std::string>(o, name));

  const Json& p = j.at("pipeline");
  c.pipeline.k = get<std::size_t>(p, "k");
  c.pipeline.lambda = get<double>(p, "lambda");
  c.pipeline.max_iterations = get<int>(p, "max_iterations");
  c.pipeline.placeholder = get<std::string>(p, "placeholder");
  c.pipeline.sim_floor = get<double>(p, "sim_floor");
  c.pipeline.ppl_ceiling = get<double>(p, "ppl_ceiling");
  c.pipeline.min_prompt_tokens = get<std::size_t>(p, "min_prompt_tokens");
  c.pipeline.min_api_tokens = get<std::size_t>(p, "min_api_tokens");
  c.pipeline.max_api_tokens = get<std::size_t>(p, "max_api_tokens");
  c.pipeline.threads = get<std::size_t>(p, "threads");
  c.pipeline.seed = c.seed;

  const Json& s = j.at("sampling");
  c.pipeline.sampling.top_p = get<double>(s, "top_p");
  c.pipeline.sampling.temperature = get<double>(s, "temperature");
  c.pipeline.sampling.max_length = get<std::size_t>(s, "max_length");
  c.pipeline.sampling.num_samples = get<std::size_t>(s, "num_samples");
  c.pipeline.sampling.seed = c.seed;

  const Json& split = j.at("split_ratio");
  if (!split.is_array() || split.size() != 2)
    throw Error(ErrorCode::kConfiguration, "split_ratio must be [train, test]");
  c.split.train = split[0].get<unsigned>();
  c.split.test = split[1].get<unsigned>();

  const Json& t = j.at("train");
  c.train.epochs = get<std::size_t>(t, "epochs");
  c.train.batch_size = get<std::size_t>(t, "batch_size");
  c.train.learning_rate = get<double>(t, "learning_rate");
  c.train.augmentation_rate = get<double>(t, "augmentation_rate");
  c.train.holdout_fraction = get<double>(t, "holdout_fraction");
  c.train.toxic_alpha = get<double>(t, "toxic_alpha");
  c.train.non_toxic_alpha = get<double>(t, "non_toxic_alpha");
  const auto mode = get<std::string>(t, "label_mode");
  if (mode == "soft")
    c.train.label_mode = LabelMode::kSoft;
  else if (mode == "binarized")
    c.train.label_mode = LabelMode::kBinarized;
  else
    throw Error(ErrorCode::kConfiguration, "train.label_mode must be 'soft' or 'binarized'");
  c.train.embed_dim = get<std::size_t>(t, "embed_dim");
  c.train.context_dim = get<std::size_t>(t, "context_dim");
  c.train.conv_channels = get<std::size_t>(t, "conv_channels");
  c.train.ffn_dim = get<std::size_t>(t, "ffn_dim");

  const Json& r = j.at("remote");
  c.remote.toxicity_endpoint = get<std::string>(r, "toxicity_endpoint");
  c.remote.llm_endpoint = get<std::string>(r, "llm_endpoint");
  c.remote.llm_model = get<std::string>(r, "llm_model");
  c.remote.chat_model = get<std::string>(r, "chat_model");
  c.remote.requests_per_second = get<double>(r, "requests_per_second");
  c.remote.max_retries = get<int>(r, "max_retries");

  c.mock_lexicon.clear();
  for (auto it = j.at("mock_lexicon").begin(); it != j.at("mock_lexicon").end(); ++it)
    c.mock_lexicon[it.key()] = it.value().get<double>();
  c.source_format = get<std::string>(j, "source_format");
  c.validate();
  return c;
}

SpanTrainConfig RunConfig::span_train_config() const {
  SpanTrainConfig t;
  t.model.k = pipeline.k;
  t.model.lambda = pipeline.lambda;
  t.model.embed_dim = train.embed_dim;
  t.model.context_dim = train.context_dim;
  t.model.conv_channels = train.conv_channels;
  t.model.ffn_dim = train.ffn_dim;
  t.model.max_tokens = pipeline.sampling.max_length;
  t.alpha.toxic = train.toxic_alpha;
  t.alpha.non_toxic = train.non_toxic_alpha;
  t.label_mode = train.label_mode;
  t.augmentation_rate = train.augmentation_rate;
  t.seed = seed;
  t.epochs = train.epochs;
  t.batch_size = train.batch_size;
  t.learning_rate = train.learning_rate;
  t.holdout_fraction = train.holdout_fraction;
  return t;
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& file,
                          const Json& overrides) {
  Json doc = RunConfig{}.to_json();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw Error(ErrorCode::kConfiguration, "cannot read config '" + file->string() + "'");
    Json layer;
    try {
      layer = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kConfiguration,
                  "config '" + file->string() + "' is not valid JSON: " + e.what());
    }
    merge(doc, expand_layer(std::move(layer)), "");
  }
  if (!overrides.is_null()) merge(doc, expand_layer(overrides), "");
  try {
    return RunConfig::from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfiguration, e.what());
  }
}

}  // namespace detox
