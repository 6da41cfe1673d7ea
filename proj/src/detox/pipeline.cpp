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

#include "detox/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <mutex>
#include <thread>

#include "detox/designed_prompts.hpp"
#include "detox/text.hpp"

namespace detox {

void PipelineConfig::validate() const {
  if (k < 1) throw Error(ErrorCode::kConfiguration, "k must be >= 1");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw Error(ErrorCode::kConfiguration, "lambda must be in [0,1]");
  if (max_iterations < 1) throw Error(ErrorCode::kConfiguration, "max_iterations (K) must be >= 1");
  if (placeholder.empty()) throw Error(ErrorCode::kConfiguration, "placeholder must be non-empty");
  if (!(sim_floor >= -1.0 && sim_floor <= 1.0))
    throw Error(ErrorCode::kConfiguration, "sim_floor must be in [-1,1]");
  if (!(ppl_ceiling > 0.0)) throw Error(ErrorCode::kConfiguration, "ppl_ceiling must be > 0");
  if (min_api_tokens > max_api_tokens)
    throw Error(ErrorCode::kConfiguration, "length filter bounds are inverted");
  if (threads < 1) throw Error(ErrorCode::kConfiguration, "threads must be >= 1");
  try {
    sampling.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfiguration, e.what());
  }
}

Json PipelineConfig::to_json() const {
  Json j;
  j["k"] = k;
  j["lambda"] = lambda;
  j["max_iterations"] = max_iterations;
  j["placeholder"] = placeholder;
  j["sim_floor"] = sim_floor;
  j["ppl_ceiling"] = ppl_ceiling;
  j["min_prompt_tokens"] = min_prompt_tokens;
  j["min_api_tokens"] = min_api_tokens;
  j["max_api_tokens"] = max_api_tokens;
  j["sampling"] = {{"top_p", sampling.top_p},
                   {"temperature", sampling.temperature},
                   {"max_length", sampling.max_length},
                   {"num_samples", sampling.num_samples}};
  j["seed"] = seed;
  j["threads"] = threads;
  return j;
}

MaskedText mask_toxic_spans(const SpanSegmentation& seg,
                            const std::vector<std::size_t>& toxic_indices,
                            std::string_view placeholder) {
  std::vector<std::size_t> idx = toxic_indices;
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  if (!idx.empty() && idx.back() >= seg.spans.size())
    throw Error(ErrorCode::kInvalidArgument, "toxic span index out of range");

  MaskedText out;
  out.placeholder = std::string(placeholder);
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && idx[j + 1] == idx[j] + 1) ++j;
    out.masked_ranges.emplace_back(seg.spans[idx[i]].start, seg.spans[idx[j]].end);
    i = j + 1;
  }
  std::size_t pos = 0;
  for (const auto& [first, last] : out.masked_ranges) {
    const std::size_t b = seg.tokens[first].begin;
    const std::size_t e = seg.tokens[last - 1].end;
    out.text.append(seg.text, pos, b - pos);
    out.text.append(placeholder);
    pos = e;
  }
  out.text.append(seg.text, pos, std::string::npos);
  return out;
}

std::string unmask(const MaskedText& masked, const SpanSegmentation& seg) {
  std::string out;
  std::size_t pos = 0;
  for (const auto& [first, last] : masked.masked_ranges) {
    std::size_t hit = masked.text.find(masked.placeholder, pos);
    if (hit == std::string::npos)
      throw Error(ErrorCode::kInvalidArgument, "masked text lost a placeholder");
    out.append(masked.text, pos, hit - pos);
    const std::size_t b = seg.tokens[first].begin;
    const std::size_t e = seg.tokens[last - 1].end;
    out.append(seg.text, b, e - b);
    pos = hit + masked.placeholder.size();
  }
  out.append(masked.text, pos, std::string::npos);
  return out;
}

IterativeResult iterative_generate(const std::function<std::string(int)>& produce,
                                   ToxicityOracle& toxicity, int max_iterations) {
  if (max_iterations < 1) throw Error(ErrorCode::kInvalidArgument, "K must be >= 1");
  IterativeResult result;
  for (int attempt = 1; attempt <= max_iterations; ++attempt) {
    result.attempts = attempt;
    std::string candidate;
    try {
      candidate = produce(attempt);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kMalformedFill) continue;
      throw Error(e.code(), std::string(e.what()) + " (attempt " + std::to_string(attempt) + ")");
    }
    if (!is_toxic_score(toxicity.score(candidate))) {
      result.text = std::move(candidate);
      return result;
    }
  }
  return result;
}

std::optional<std::string> fulfill_spans(const MaskedText& masked, MaskFiller& filler,
                                         ToxicityOracle& toxicity, int max_iterations,
                                         std::uint64_t seed, int* attempts) {
  if (masked.placeholder.empty() || masked.text.find(masked.placeholder) == std::string::npos)
    throw Error(ErrorCode::kPrecondition, "fulfill_spans needs at least one placeholder");
  auto res = iterative_generate(
      [&](int attempt) {
        std::string filled = filler.fill(masked.text, masked.placeholder,
                                         mix_seed(seed, static_cast<std::uint64_t>(attempt)));
        if (filled.find(masked.placeholder) != std::string::npos)
          throw Error(ErrorCode::kMalformedFill, "fill still contains the placeholder");
        return filled;
      },
      toxicity, max_iterations);
  if (attempts) *attempts = res.attempts;
  return res.text;
}

std::optional<ContinuationResult> continue_text(std::string_view prompt, Generator& generator,
                                                ToxicityOracle& toxicity,
                                                SimilarityOracle& similarity,
                                                PerplexityOracle& perplexity,
                                                const PipelineConfig& config,
                                                std::uint64_t seed) {
  if (is_toxic_score(toxicity.score(prompt)))
    throw Error(ErrorCode::kPrecondition, "continue_text called with a toxic prompt");
  SamplingConfig sampling = config.sampling;
  sampling.num_samples = 1;
  auto res = iterative_generate(
      [&](int attempt) {
        sampling.seed = mix_seed(seed, static_cast<std::uint64_t>(attempt));
        auto out = generator.generate(prompt, sampling);
        if (out.size() != 1)
          throw Error(ErrorCode::kProtocol, "generator returned the wrong number of samples");
        auto tokens = tokenize(out.front());
        if (tokens.size() > sampling.max_length)
          out.front().resize(tokens[sampling.max_length - 1].end);
        return out.front();
      },
      toxicity, config.max_iterations);
  if (!res.text) return std::nullopt;
  ContinuationResult cr;
  cr.attempts = res.attempts;
  const bool long_enough = count_tokens(prompt) >= config.min_prompt_tokens;
  const bool keep = long_enough && similarity.sim(prompt, *res.text) >= config.sim_floor &&
                    perplexity.ppl(*res.text) <= config.ppl_ceiling;
  if (keep) {
    cr.continuation = std::move(*res.text);
    cr.has_context = true;
  } else {
    cr.continuation = std::string(kInsufficientContextText);
    cr.has_context = false;
  }
  return cr;
}

bool filter_length(std::string_view text, std::size_t min_tokens, std::size_t max_tokens) {
  const std::size_t n = count_tokens(text);
  return n >= min_tokens && n <= max_tokens && n > 0;
}

RecordOutcome build_chain_record(const PromptRecord& prompt, const SpanScorer& spans,
                                 const Oracles& o, const PipelineConfig& config,
                                 std::uint64_t record_seed) {
  if (trim(prompt.text).empty())
    throw Error(ErrorCode::kPrecondition, "prompt '" + prompt.id + "' is empty");
  RecordOutcome outcome;
  DetoxChainRecord rec;
  rec.id = prompt.id;
  rec.prompt = prompt.text;

  ScoredText scored = spans.score(prompt.text);
  auto toxic = detect_toxic_spans(scored.spans.scores, config.lambda);
  rec.is_toxic = !toxic.empty();
  if (rec.is_toxic) {
    MaskedText masked = mask_toxic_spans(scored.segmentation, toxic, config.placeholder);
    auto filled = fulfill_spans(masked, *o.filler, *o.toxicity, config.max_iterations,
                                mix_seed(record_seed, 1));
    if (!filled) {
      outcome.discard = Discard{prompt.id, "fulfilling",
                                "no non-toxic fill within " +
                                    std::to_string(config.max_iterations) + " attempts"};
      return outcome;
    }
    rec.masked_prompt = masked.text;
    rec.rephrased_prompt = std::move(*filled);
  }
  const std::string& base = rec.is_toxic ? *rec.rephrased_prompt : rec.prompt;
  auto cont = continue_text(base, *o.generator, *o.toxicity, *o.similarity, *o.perplexity, config,
                            mix_seed(record_seed, 2));
  if (!cont) {
    outcome.discard = Discard{prompt.id, "continuation",
                              "no non-toxic continuation within " +
                                  std::to_string(config.max_iterations) + " attempts"};
    return outcome;
  }
  rec.has_context = cont->has_context;
  if (rec.has_context) rec.continuation = std::move(cont->continuation);
  rec.branch = branch_for(rec.is_toxic, rec.has_context);
  outcome.record = std::move(rec);
  return outcome;
}

Json RunReport::to_json() const {
  Json j;
  j["branch_counts"] = Json::object();
  for (const auto& [k, v] : branch_counts) j["branch_counts"][k] = v;
  j["discards_by_stage"] = Json::object();
  for (const auto& [k, v] : discards_by_stage) j["discards_by_stage"][k] = v;
  j["oracle_calls"] = Json::object();
  for (const auto& [k, v] : oracle_calls) j["oracle_calls"][k] = v;
  j["discards"] = Json::array();
  for (const auto& d : discards)
    j["discards"].push_back({{"id", d.id}, {"stage", d.stage}, {"reason", d.reason}});
  j["input_records"] = input_records;
  j["emitted_records"] = emitted_records;
  j["aborted"] = aborted;
  if (aborted) j["abort_reason"] = abort_reason;
  j["config"] = config_snapshot;
  j["seed"] = seed;
  j["tool_version"] = std::string(version());
  return j;
}

namespace {

class CountingSimilarity final : public SimilarityOracle {
 public:
  explicit CountingSimilarity(SimilarityOracle& inner) : inner_(inner) {}
  double sim(std::string_view a, std::string_view b) override {
    ++calls;
    return inner_.sim(a, b);
  }
  std::atomic<std::size_t> calls{0};

 private:
  SimilarityOracle& inner_;
};

class CountingPerplexity final : public PerplexityOracle {
 public:
  explicit CountingPerplexity(PerplexityOracle& inner) : inner_(inner) {}
  double ppl(std::string_view t) override {
    ++calls;
    return inner_.ppl(t);
  }
  std::atomic<std::size_t> calls{0};

 private:
  PerplexityOracle& inner_;
};

class CountingFiller final : public MaskFiller {
 public:
  explicit CountingFiller(MaskFiller& inner) : inner_(inner) {}
  std::string fill(std::string_view m, std::string_view p, std::uint64_t s) override {
    ++calls;
    return inner_.fill(m, p, s);
  }
  std::atomic<std::size_t> calls{0};

 private:
  MaskFiller& inner_;
};

class CountingGenerator final : public Generator {
 public:
  explicit CountingGenerator(Generator& inner) : inner_(inner) {}
  std::vector<std::string> generate(std::string_view p, const SamplingConfig& c) override {
    ++calls;
    return inner_.generate(p, c);
  }
  std::atomic<std::size_t> calls{0};

 private:
  Generator& inner_;
};

class CountingChat final : public ChatCompleter {
 public:
  explicit CountingChat(ChatCompleter& inner) : inner_(inner) {}
  std::string complete(std::string_view i, std::string_view in) override {
    ++calls;
    return inner_.complete(i, in);
  }
  std::atomic<std::size_t> calls{0};

 private:
  ChatCompleter& inner_;
};

bool systemic(ErrorCode code) {
  return code == ErrorCode::kService || code == ErrorCode::kProtocol ||
         code == ErrorCode::kConfiguration;
}

// Runs `one(i)` for every prompt over `threads` workers and assembles the
// outcomes in input order.
PipelineResult drive(const std::vector<PromptRecord>& prompts, const PipelineConfig& config,
                     RunControl control,
                     const std::function<RecordOutcome(std::size_t)>& one) {
  PipelineResult result;
  RunReport& report = result.report;
  report.input_records = prompts.size();
  report.seed = config.seed;
  report.config_snapshot = config.to_json();
  for (ChainBranch b : kAllBranches) report.branch_counts[std::string(branch_name(b))] = 0;

  std::vector<std::optional<RecordOutcome>> outcomes(prompts.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex abort_mu;

  auto worker = [&] {
    while (!stop.load()) {
      if (control.cancel && control.cancel->load()) {
        stop = true;
        break;
      }
      const std::size_t i = next.fetch_add(1);
      if (i >= prompts.size()) break;
      try {
        outcomes[i] = one(i);
      } catch (const Error& e) {
        if (systemic(e.code())) {
          std::lock_guard lock(abort_mu);
          if (!report.aborted) {
            report.aborted = true;
            report.abort_reason = std::string(error_code_name(e.code())) + ": " + e.what();
          }
          stop = true;
          break;
        }
        RecordOutcome o;
        o.discard = Discard{prompts[i].id, "error",
                            std::string(error_code_name(e.code())) + ": " + e.what()};
        outcomes[i] = std::move(o);
      } catch (const std::exception& e) {
        RecordOutcome o;
        o.discard = Discard{prompts[i].id, "error", e.what()};
        outcomes[i] = std::move(o);
      }
    }
  };
  const std::size_t n_threads = std::min(config.threads, std::max<std::size_t>(1, prompts.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (control.cancel && control.cancel->load() && !report.aborted) {
    report.aborted = true;
    report.abort_reason = "cancelled";
  }

  for (auto& o : outcomes) {
    if (!o) continue;
    if (o->record) {
      ++report.branch_counts[std::string(branch_name(o->record->branch))];
      result.records.push_back(std::move(*o->record));
    } else if (o->discard) {
      ++report.discards_by_stage[o->discard->stage];
      log_warning("discarded record '" + o->discard->id + "' at " + o->discard->stage + ": " +
                  o->discard->reason);
      report.discards.push_back(std::move(*o->discard));
    }
  }
  report.emitted_records = result.records.size();
  return result;
}

}  // namespace

PipelineResult run_pipeline(const std::vector<PromptRecord>& prompts, const SpanScorer& spans,
                            const Oracles& oracles, const PipelineConfig& config,
                            RunControl control) {
  config.validate();
  if (!oracles.toxicity || !oracles.similarity || !oracles.perplexity || !oracles.filler ||
      !oracles.generator)
    throw Error(ErrorCode::kConfiguration, "run_pipeline needs toxicity, similarity, "
                                           "perplexity, filler and generator oracles");
  if (spans.span_length() != config.k)
    throw Error(ErrorCode::kConfiguration,
                "span scorer k=" + std::to_string(spans.span_length()) +
                    " does not match pipeline k=" + std::to_string(config.k));
  CountingToxicityOracle tox(*oracles.toxicity);
  CountingSimilarity sim(*oracles.similarity);
  CountingPerplexity ppl(*oracles.perplexity);
  CountingFiller filler(*oracles.filler);
  CountingGenerator gen(*oracles.generator);
  Oracles counted{&tox, &sim, &ppl, &filler, &gen, oracles.chat};

  auto result = drive(prompts, config, control, [&](std::size_t i) {
    return build_chain_record(prompts[i], spans, counted, config,
                              mix_seed(config.seed, static_cast<std::uint64_t>(i)));
  });
  auto& calls = result.report.oracle_calls;
  calls["toxicity"] = tox.calls();
  calls["similarity"] = sim.calls.load();
  calls["perplexity"] = ppl.calls.load();
  calls["filler"] = filler.calls.load();
  calls["generator"] = gen.calls.load();
  return result;
}

namespace {
bool letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

bool word_prefix(std::string_view text, std::string_view word) {
  return starts_with_icase(text, word) && (text.size() == word.size() || !letter(text[word.size()]));
}
}  // namespace

std::optional<Verdict> parse_toxicity_answer(std::string_view answer) {
  std::string_view a = trim(answer);
  for (std::string_view p : {"non-toxic", "non toxic", "nontoxic", "not toxic"})
    if (starts_with_icase(a, p)) return Verdict::kNonToxic;
  if (word_prefix(a, "no")) return Verdict::kNonToxic;
  if (starts_with_icase(a, "toxic") || word_prefix(a, "yes")) return Verdict::kToxic;
  return std::nullopt;
}

std::optional<ContextAnswer> parse_context_answer(std::string_view answer) {
  std::string_view a = trim(answer);
  if (a.empty()) return std::nullopt;
  if (word_prefix(a, "no")) return ContextAnswer{false, ""};
  if (word_prefix(a, "yes")) {
    a.remove_prefix(3);
    while (!a.empty() && (std::ispunct(static_cast<unsigned char>(a.front())) ||
                          std::isspace(static_cast<unsigned char>(a.front()))))
      a.remove_prefix(1);
    a = trim(a);
    if (a.empty()) return std::nullopt;
  }
  return ContextAnswer{true, std::string(a)};
}

RecordOutcome build_chain_record_api(const PromptRecord& prompt, ChatCompleter& chat,
                                     ToxicityOracle& toxicity, const PipelineConfig& config) {
  if (trim(prompt.text).empty())
    throw Error(ErrorCode::kPrecondition, "prompt '" + prompt.id + "' is empty");
  RecordOutcome outcome;
  auto discard = [&](std::string stage, std::string reason) {
    outcome.discard = Discard{prompt.id, std::move(stage), std::move(reason)};
    return outcome;
  };
  // Asks once, then once more if `accept` rejects the first answer.
  auto ask_twice = [&](std::string_view instruction, std::string_view input, auto accept) {
    for (int i = 0; i < 2; ++i) {
      auto parsed = accept(chat.complete(instruction, input));
      if (parsed) return parsed;
    }
    return decltype(accept(std::string{})){};
  };

  DetoxChainRecord rec;
  rec.id = prompt.id;
  rec.prompt = prompt.text;

  auto verdict = ask_twice(prompts::kDetection, prompt.text,
                           [](const std::string& a) { return parse_toxicity_answer(a); });
  if (!verdict) return discard("api_detection", "unparseable toxicity judgment");
  rec.is_toxic = *verdict == Verdict::kToxic;

  if (rec.is_toxic) {
    auto masked_api = ask_twice(prompts::kMasking, prompt.text,
                                [&](const std::string& a) -> std::optional<std::string> {
                                  std::string t(trim(a));
                                  if (t.find(kApiPlaceholder) == std::string::npos &&
                                      t.find(config.placeholder) == std::string::npos)
                                    return std::nullopt;
                                  return replace_all(t, config.placeholder, kApiPlaceholder);
                                });
    if (!masked_api) return discard("api_masking", "masked text has no [MASK] token");
    auto filled = iterative_generate(
        [&](int) {
          std::string a(trim(chat.complete(prompts::kFilling, *masked_api)));
          if (a.empty() || a.find(kApiPlaceholder) != std::string::npos ||
              a.find(config.placeholder) != std::string::npos)
            throw Error(ErrorCode::kMalformedFill, "fill still contains [MASK]");
          return a;
        },
        toxicity, config.max_iterations);
    if (!filled.text) return discard("api_fulfilling", "no non-toxic fill within K attempts");
    rec.masked_prompt = replace_all(*masked_api, kApiPlaceholder, config.placeholder);
    rec.rephrased_prompt = std::move(*filled.text);
  }

  const std::string base = rec.is_toxic ? *rec.rephrased_prompt : rec.prompt;
  auto first = ask_twice(prompts::kContext, base,
                         [](const std::string& a) { return parse_context_answer(a); });
  if (!first) return discard("api_context", "unparseable context judgment");
  if (!first->has_context) {
    rec.has_context = false;
  } else {
    auto cont = iterative_generate(
        [&](int attempt) {
          std::optional<ContextAnswer> ans =
              attempt == 1 ? first : parse_context_answer(chat.complete(prompts::kContext, base));
          if (!ans || !ans->has_context ||
              !filter_length(ans->continuation, config.min_api_tokens, config.max_api_tokens))
            throw Error(ErrorCode::kMalformedFill, "continuation rejected by length filter");
          return ans->continuation;
        },
        toxicity, config.max_iterations);
    if (!cont.text)
      return discard("api_continuation", "no acceptable continuation within K attempts");
    rec.has_context = true;
    rec.continuation = std::move(*cont.text);
  }
  rec.branch = branch_for(rec.is_toxic, rec.has_context);
  outcome.record = std::move(rec);
  return outcome;
}

PipelineResult run_api_pipeline(const std::vector<PromptRecord>& prompts, ChatCompleter& chat,
                                ToxicityOracle& toxicity, const PipelineConfig& config,
                                RunControl control) {
  config.validate();
  CountingChat counted_chat(chat);
  CountingToxicityOracle tox(toxicity);
  // Designed prompts are issued sequentially per record; one worker keeps
  // the chat transcript in input order.
  PipelineConfig sequential = config;
  sequential.threads = 1;
  auto result = drive(prompts, sequential, control, [&](std::size_t i) {
    return build_chain_record_api(prompts[i], counted_chat, tox, config);
  });
  result.report.config_snapshot = config.to_json();
  result.report.oracle_calls["chat"] = counted_chat.calls.load();
  result.report.oracle_calls["toxicity"] = tox.calls();
  return result;
}

void write_corpus(std::ostream& out, const std::vector<DetoxChainRecord>& records,
                  const TemplateSet& templates) {
  for (const auto& r : records) out << record_to_json(r, templates).dump() << '\n';
}

Json prompt_to_json(const PromptRecord& p) {
  Json j;
  j["id"] = p.id;
  j["text"] = p.text;
  j["toxicity"] = p.toxicity ? Json(*p.toxicity) : Json(nullptr);
  j["split"] = p.split;
  return j;
}

std::vector<PromptRecord> read_prompts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read prompts '" + path.string() + "'");
  std::vector<PromptRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      auto j = Json::parse(line);
      PromptRecord p;
      p.id = j.contains("id") && !j["id"].is_null()
                 ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                 : std::to_string(out.size());
      p.text = j.at("text").get<std::string>();
      if (auto it = j.find("toxicity"); it != j.end() && !it->is_null())
        p.toxicity = it->get<double>();
      if (auto it = j.find("split"); it != j.end() && !it->is_null())
        p.split = it->get<std::string>();
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace detox
