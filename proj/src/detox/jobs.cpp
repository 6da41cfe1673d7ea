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

#include "detox/jobs.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "detox/chain_codec.hpp"
#include "detox/dataset.hpp"
#include "detox/evaluation.hpp"
#include "detox/span_model.hpp"
#include "detox/text.hpp"

namespace detox {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kMockWordsPerSample = 8;

RetryPolicy retry_policy(const RunConfig& c) {
  RetryPolicy r;
  r.max_retries = c.remote.max_retries;
  return r;
}

RemoteLlmOptions llm_options(const RunConfig& c, bool chat) {
  RemoteLlmOptions o;
  o.endpoint = c.remote.llm_endpoint;
  o.model = chat ? c.remote.chat_model : c.remote.llm_model;
  o.api_key = require_env_key(kLlmKeyEnv);
  o.requests_per_second = c.remote.requests_per_second;
  o.retry = retry_policy(c);
  return o;
}

[[noreturn]] void no_remote(const char* what) {
  throw Error(ErrorCode::kConfiguration,
              std::string("no remote backend exists for the ") + what +
                  " oracle; select \"mock\" for it");
}

}  // namespace

OracleBundle::OracleBundle(const RunConfig& config, std::shared_ptr<HttpTransport> transport)
    : config_(config), transport_(std::move(transport)) {
  std::shared_ptr<ToxicityOracle> base;
  if (config.oracles.toxicity == OracleKind::kMock) {
    base = std::make_shared<LexiconToxicityOracle>(config.mock_lexicon);
  } else {
    RemoteToxicityOptions o;
    o.endpoint = config.remote.toxicity_endpoint;
    o.api_key = require_env_key(kToxicityKeyEnv);
    o.requests_per_second = config.remote.requests_per_second;
    o.retry = retry_policy(config);
    if (!transport_) transport_ = std::make_shared<HttplibTransport>();
    base = std::shared_ptr<ToxicityOracle>(remote_toxicity_client(o, transport_));
  }
  if (!config.paths.cache.empty() || config.oracles.toxicity == OracleKind::kRemote) {
    std::optional<fs::path> path;
    if (!config.paths.cache.empty()) path = config.paths.cache;
    toxicity_ = std::shared_ptr<ToxicityOracle>(cached(base, path));
  } else {
    toxicity_ = base;
  }
}

SimilarityOracle& OracleBundle::similarity() {
  if (!similarity_) {
    if (config_.oracles.similarity == OracleKind::kRemote) no_remote("similarity");
    similarity_ = std::make_unique<BagOfWordsSimilarity>();
  }
  return *similarity_;
}

PerplexityOracle& OracleBundle::perplexity() {
  if (!perplexity_) {
    if (config_.oracles.perplexity == OracleKind::kRemote) no_remote("perplexity");
    perplexity_ = std::make_unique<UnigramPerplexity>(default_neutral_words());
  }
  return *perplexity_;
}

ChatCompleter& OracleBundle::chat() {
  if (!chat_) {
    if (config_.oracles.chat == OracleKind::kMock) {
      chat_ = std::make_unique<RuleChatCompleter>(config_.mock_lexicon, default_neutral_words());
    } else {
      if (!transport_) transport_ = std::make_shared<HttplibTransport>();
      chat_ = std::make_unique<RemoteChatCompleter>(llm_options(config_, true), transport_);
    }
  }
  return *chat_;
}

MaskFiller& OracleBundle::filler() {
  if (!filler_) {
    if (config_.oracles.filler == OracleKind::kMock) {
      filler_ = std::make_unique<VocabularyFiller>(default_neutral_words());
    } else {
      if (!transport_) transport_ = std::make_shared<HttplibTransport>();
      filler_chat_ = std::make_unique<RemoteChatCompleter>(llm_options(config_, true), transport_);
      filler_ = std::make_unique<ChatMaskFiller>(*filler_chat_);
    }
  }
  return *filler_;
}

Generator& OracleBundle::generator() {
  if (!generator_) {
    if (config_.oracles.generator == OracleKind::kMock) {
      std::vector<std::pair<std::string, double>> words;
      for (const auto& w : default_neutral_words()) words.emplace_back(w, 1.0);
      generator_ = std::make_unique<NucleusUnigramGenerator>(std::move(words), kMockWordsPerSample);
    } else {
      if (!transport_) transport_ = std::make_shared<HttplibTransport>();
      generator_ = std::make_unique<RemoteCompletionGenerator>(llm_options(config_, false), transport_);
    }
  }
  return *generator_;
}

Oracles OracleBundle::view() {
  return Oracles{&toxicity(), &similarity(), &perplexity(), &filler(), &generator(), nullptr};
}

Json artifact_meta(const RunConfig& config) {
  return Json{{"config", config.to_json()},
              {"seed", config.seed},
              {"tool_version", std::string(version())}};
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error(ErrorCode::kIo, "write to '" + path.string() + "' failed");
}

// Writes `path` when complete, else `path.partial`, and removes the other
// so that stale files never masquerade as results.
fs::path write_output(const fs::path& path, const std::string& content, bool complete) {
  fs::path partial = path;
  partial += ".partial";
  const fs::path& target = complete ? path : partial;
  write_file(target, content);
  std::error_code ec;
  fs::remove(complete ? partial : path, ec);
  return target;
}

fs::path sibling(const fs::path& p, const char* suffix) {
  fs::path out = p;
  out += suffix;
  return out;
}

const std::string& require_path(const std::string& value, const char* key) {
  if (value.empty())
    throw Error(ErrorCode::kConfiguration, std::string("paths.") + key + " is required");
  return value;
}

std::string arg_string(const Json& args, const char* key, const std::string& fallback = {}) {
  if (!args.is_object()) return fallback;
  auto it = args.find(key);
  if (it == args.end() || it->is_null()) return fallback;
  if (!it->is_string()) throw Error(ErrorCode::kInvalidArgument, std::string(key) + " must be a string");
  return it->get<std::string>();
}

std::unique_ptr<SpanScorer> make_span_scorer(const RunConfig& c, ToxicityOracle& tox,
                                             std::unique_ptr<SpanCnnModel>& model_slot) {
  if (!c.paths.model.empty()) {
    model_slot = std::make_unique<SpanCnnModel>(SpanCnnModel::load(c.paths.model, c.pipeline.k));
    return nullptr;
  }
  return std::make_unique<OracleSpanScorer>(tox, c.pipeline.k, c.pipeline.lambda);
}

JobOutcome finish_pipeline(const RunConfig& c, PipelineResult& result,
                           const std::atomic<bool>* cancel) {
  const fs::path out = require_path(c.paths.output, "output");
  const bool cancelled = cancel && cancel->load();
  const bool complete = !result.report.aborted;
  std::ostringstream corpus;
  write_corpus(corpus, result.records, TemplateSet::defaults(c.pipeline.placeholder));
  const fs::path written = write_output(out, corpus.str(), complete);

  Json report = result.report.to_json();
  report["meta"] = artifact_meta(c);
  const fs::path report_path = c.paths.report.empty() ? sibling(out, ".report.json")
                                                      : fs::path(c.paths.report);
  const fs::path report_written = write_output(report_path, report.dump(2) + "\n", complete);

  JobOutcome o;
  o.complete = complete;
  o.cancelled = cancelled;
  o.summary = {{"status", complete ? "complete" : "partial"},
               {"corpus", written.string()},
               {"report", report_written.string()},
               {"input_records", result.report.input_records},
               {"emitted_records", result.report.emitted_records},
               {"branch_counts", report["branch_counts"]},
               {"discards_by_stage", report["discards_by_stage"]}};
  if (!complete) o.summary["abort_reason"] = result.report.abort_reason;
  return o;
}

JobOutcome job_build_chains(const RunConfig& c, const std::atomic<bool>* cancel,
                            std::shared_ptr<HttpTransport> transport) {
  auto prompts = read_prompts(require_path(c.paths.input, "input"));
  OracleBundle bundle(c, std::move(transport));
  std::unique_ptr<SpanCnnModel> model;
  auto oracle_scorer = make_span_scorer(c, bundle.toxicity(), model);
  const SpanScorer& scorer = model ? static_cast<const SpanScorer&>(*model) : *oracle_scorer;
  PipelineConfig pc = c.pipeline;
  auto result = run_pipeline(prompts, scorer, bundle.view(), pc, RunControl{cancel});
  return finish_pipeline(c, result, cancel);
}

JobOutcome job_build_chains_api(const RunConfig& c, const std::atomic<bool>* cancel,
                                std::shared_ptr<HttpTransport> transport) {
  auto prompts = read_prompts(require_path(c.paths.input, "input"));
  OracleBundle bundle(c, std::move(transport));
  auto result = run_api_pipeline(prompts, bundle.chat(), bundle.toxicity(), c.pipeline,
                                 RunControl{cancel});
  return finish_pipeline(c, result, cancel);
}

JobOutcome job_ingest(const RunConfig& c, const Json& args) {
  const std::string source = arg_string(args, "source", c.paths.input);
  if (source.empty()) throw Error(ErrorCode::kConfiguration, "ingest needs a source file");
  const SourceFormat format = source_format_from_name(arg_string(args, "format", c.source_format));
  auto result = ingest(source, format, c.split, c.seed);
  const fs::path out = require_path(c.paths.output, "output");
  std::ostringstream lines;
  for (const auto& p : result.prompts) lines << prompt_to_json(p).dump() << '\n';
  write_output(out, lines.str(), true);
  Json meta = artifact_meta(c);
  meta["source"] = source;
  meta["format"] = std::string(source_format_name(format));
  meta["ingest"] = result.report.to_json();
  write_file(sibling(out, ".meta.json"), meta.dump(2) + "\n");
  JobOutcome o;
  o.summary = {{"status", "complete"}, {"output", out.string()}, {"ingest", result.report.to_json()}};
  return o;
}

Json accuracy_json(const SpanAccuracy& a) {
  return Json{{"span_exact", a.span_exact},
              {"span_per_unit", a.span_per_unit},
              {"instance", a.instance},
              {"samples", a.samples}};
}

JobOutcome job_train_span(const RunConfig& c, std::shared_ptr<HttpTransport> transport) {
  auto corpus = read_span_corpus(require_path(c.paths.input, "input"));
  const fs::path model_path = require_path(c.paths.model, "model");
  OracleBundle bundle(c, std::move(transport));
  SpanTrainConfig tc = c.span_train_config();

  // Label once, then train on the filled-in labels; the toxic spans found
  // here form the augmentation bank.
  auto labeled = label_corpus(corpus, tc.model.k, tc.alpha, &bundle.toxicity());
  std::vector<SpanCorpusItem> filled;
  filled.reserve(labeled.size());
  for (const auto& s : labeled) {
    filled.push_back({s.text, s.global_label, s.span_labels});
    if (tc.augmentation_rate > 0.0) {
      const auto seg = segment_spans(s.text, tc.model.k);
      for (std::size_t i = 0; i < seg.spans.size(); ++i)
        if (is_toxic_score(s.span_labels[i])) tc.span_bank.push_back({seg.spans[i].text, s.span_labels[i]});
    }
  }
  auto result = train_span_cnn(filled, tc, nullptr);
  Json checkpoint = result.model.to_json();
  checkpoint["meta"] = artifact_meta(c);
  write_output(model_path, checkpoint.dump() + "\n", true);

  JobOutcome o;
  o.summary = {{"status", "complete"},
               {"model", model_path.string()},
               {"train_samples", result.report.train_samples},
               {"span_bank", tc.span_bank.size()},
               {"epoch_losses", result.report.epoch_losses}};
  o.summary["holdout"] = result.report.holdout ? accuracy_json(*result.report.holdout) : Json(nullptr);
  return o;
}

Json detection_json(const ScoredText& s, std::string_view text) {
  Json spans = Json::array();
  for (std::size_t i = 0; i < s.segmentation.spans.size(); ++i) {
    const Span& sp = s.segmentation.spans[i];
    spans.push_back({{"index", i},
                     {"start", sp.start},
                     {"end", sp.end},
                     {"text", sp.text},
                     {"score", s.spans.scores[i]}});
  }
  return Json{{"text", std::string(text)},
              {"global", s.global},
              {"is_toxic", is_toxic_score(s.global)},
              {"spans", std::move(spans)},
              {"toxic_spans", detect_toxic_spans(s.spans)},
              {"truncated", s.truncated}};
}

JobOutcome job_detect(const RunConfig& c, const Json& args,
                      std::shared_ptr<HttpTransport> transport) {
  std::vector<std::string> texts;
  if (args.is_object() && args.contains("text")) {
    texts.push_back(arg_string(args, "text"));
  } else {
    for (auto& p : read_prompts(require_path(c.paths.input, "input"))) texts.push_back(p.text);
  }
  OracleBundle bundle(c, std::move(transport));
  std::unique_ptr<SpanCnnModel> model;
  auto oracle_scorer = make_span_scorer(c, bundle.toxicity(), model);
  const SpanScorer& scorer = model ? static_cast<const SpanScorer&>(*model) : *oracle_scorer;

  Json results = Json::array();
  for (const auto& t : texts) {
    ScoredText s = scorer.score(t);
    s.spans.lambda = c.pipeline.lambda;
    results.push_back(detection_json(s, t));
  }
  if (!c.paths.output.empty()) {
    std::ostringstream lines;
    for (const auto& r : results) lines << r.dump() << '\n';
    write_output(c.paths.output, lines.str(), true);
    write_file(sibling(c.paths.output, ".meta.json"), artifact_meta(c).dump(2) + "\n");
  }
  JobOutcome o;
  o.summary = {{"status", "complete"},
               {"k", c.pipeline.k},
               {"lambda", c.pipeline.lambda},
               {"scorer", model ? "span-cnn" : "oracle"},
               {"results", std::move(results)}};
  return o;
}

std::map<std::string, double> read_gold_toxicity(const std::string& path) {
  std::map<std::string, double> out;
  for (const auto& p : read_prompts(path))
    if (p.toxicity) out[p.id] = *p.toxicity;
  return out;
}

JobOutcome job_evaluate(const RunConfig& c, const Json& args) {
  auto file = read_generations(require_path(c.paths.input, "input"));
  const std::string gold = arg_string(args, "gold");
  if (!gold.empty())
    for (const auto& [id, t] : read_gold_toxicity(gold)) file.gold_toxicity[id] = t;
  EvalOptions opts;
  const std::string mode = arg_string(args, "edit_mode", "token");
  if (mode == "char")
    opts.edit_mode = EditMode::kChar;
  else if (mode != "token")
    throw Error(ErrorCode::kInvalidArgument, "edit_mode must be 'token' or 'char'");
  opts.expected_samples = c.pipeline.sampling.num_samples;
  OracleBundle bundle(c);
  auto report = evaluate_generations(file.batches, file.gold_toxicity, bundle.similarity(),
                                     bundle.perplexity(), opts);
  Json rj = report.to_json();
  rj["meta"] = artifact_meta(c);
  if (!c.paths.output.empty()) write_output(c.paths.output, rj.dump(2) + "\n", true);
  JobOutcome o;
  o.summary = {{"status", "complete"}, {"report", rj}, {"table", report.to_table()}};
  return o;
}

JobOutcome job_grade_chains(const RunConfig& c, const Json& args,
                            std::shared_ptr<HttpTransport> transport) {
  const std::string gold_path = arg_string(args, "gold");
  if (gold_path.empty()) throw Error(ErrorCode::kConfiguration, "grade-chains needs a gold corpus");
  std::vector<DetoxChainRecord> gold;
  {
    std::ifstream in(gold_path);
    if (!in) throw Error(ErrorCode::kIo, "cannot read gold corpus '" + gold_path + "'");
    std::string line;
    while (std::getline(in, line))
      if (!trim(line).empty()) gold.push_back(record_from_json(Json::parse(line)));
  }
  const TemplateSet templates = TemplateSet::defaults(c.pipeline.placeholder);
  std::vector<GradedOutput> outputs;
  {
    const std::string in_path = require_path(c.paths.input, "input");
    std::ifstream in(in_path);
    if (!in) throw Error(ErrorCode::kIo, "cannot read model outputs '" + in_path + "'");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      try {
        const Json j = Json::parse(line);
        outputs.push_back({j.at("id").get<std::string>(),
                           parse_chain(j.at("text").get<std::string>(), templates,
                                       ParseMode::kLenient)});
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kParse, in_path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }
  OracleBundle bundle(c, std::move(transport));
  auto report = evaluate_chain_steps(outputs, gold, bundle.toxicity(), bundle.similarity());
  Json rj = report.to_json();
  std::size_t complete = 0;
  for (const auto& o : outputs) complete += o.parsed.complete;
  rj["complete_parses"] = complete;
  rj["meta"] = artifact_meta(c);
  if (!c.paths.output.empty()) write_output(c.paths.output, rj.dump(2) + "\n", true);
  JobOutcome o;
  o.summary = {{"status", "complete"}, {"report", rj}};
  return o;
}

JobOutcome job_parse_chain(const RunConfig& c, const Json& args) {
  if (!args.is_object() || !args.contains("text"))
    throw Error(ErrorCode::kInvalidArgument, "parse-chain needs a chain text");
  const std::string mode = arg_string(args, "mode", "lenient");
  ParseMode pm;
  if (mode == "strict")
    pm = ParseMode::kStrict;
  else if (mode == "lenient")
    pm = ParseMode::kLenient;
  else
    throw Error(ErrorCode::kInvalidArgument, "mode must be 'strict' or 'lenient'");
  auto result =
      parse_chain(arg_string(args, "text"), TemplateSet::defaults(c.pipeline.placeholder), pm);
  JobOutcome o;
  o.summary = parse_result_to_json(result);
  return o;
}

}  // namespace

JobOutcome run_job(std::string_view command, const RunConfig& config, const Json& args,
                   const std::atomic<bool>* cancel, std::shared_ptr<HttpTransport> transport) {
  config.validate();
  if (command == "build-chains") return job_build_chains(config, cancel, std::move(transport));
  if (command == "build-chains-api")
    return job_build_chains_api(config, cancel, std::move(transport));
  if (command == "ingest") return job_ingest(config, args);
  if (command == "train-span") return job_train_span(config, std::move(transport));
  if (command == "detect") return job_detect(config, args, std::move(transport));
  if (command == "evaluate") return job_evaluate(config, args);
  if (command == "grade-chains") return job_grade_chains(config, args, std::move(transport));
  if (command == "parse-chain") return job_parse_chain(config, args);
  throw Error(ErrorCode::kInvalidArgument, "unknown command '" + std::string(command) + "'");
}

}  // namespace detox
