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

#include "detox/span_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "detox/oracles.hpp"

namespace detox {

SpanSegmentation segment_spans(std::string_view text, std::size_t k) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "span length k must be >= 1");
  SpanSegmentation seg;
  seg.text = std::string(text);
  seg.k = k;
  seg.tokens = tokenize(text);
  if (seg.tokens.empty()) throw Error(ErrorCode::kEmptyInput, "cannot segment empty text");
  for (std::size_t start = 0; start < seg.tokens.size(); start += k) {
    std::size_t end = std::min(start + k, seg.tokens.size());
    std::size_t b = seg.tokens[start].begin;
    std::size_t e = seg.tokens[end - 1].end;
    seg.spans.push_back(Span{start, end, std::string(text.substr(b, e - b))});
  }
  return seg;
}

std::vector<std::size_t> detect_toxic_spans(std::span<const double> scores, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "lambda must be in [0,1]");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] >= lambda) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> detect_toxic_spans(const SpanScoreVector& v) {
  return detect_toxic_spans(v.scores, v.lambda);
}

OracleSpanScorer::OracleSpanScorer(ToxicityOracle& oracle, std::size_t k, double lambda)
    : oracle_(oracle), k_(k), lambda_(lambda) {
  if (k_ < 1) throw Error(ErrorCode::kInvalidArgument, "span length k must be >= 1");
}

ScoredText OracleSpanScorer::score(std::string_view text) const {
  ScoredText out;
  out.segmentation = segment_spans(text, k_);
  out.global = oracle_.score(text);
  out.spans.k = k_;
  out.spans.lambda = lambda_;
  for (const Span& s : out.segmentation.spans) out.spans.scores.push_back(oracle_.score(s.text));
  return out;
}

void SpanCnnConfig::validate() const {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "span length k must be >= 1");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "lambda must be in [0,1]");
  if (!embed_dim || !context_dim || !conv_channels || !ffn_dim || !max_tokens)
    throw Error(ErrorCode::kInvalidArgument, "span model dimensions must be positive");
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double soft_cross_entropy(double logit, double target) {
  double softplus = std::max(logit, 0.0) + std::log1p(std::exp(-std::abs(logit)));
  return softplus - target * logit;
}

namespace {
double apply_mode(double label, LabelMode mode) {
  if (mode == LabelMode::kBinarized) return label >= kToxicThreshold ? 1.0 : 0.0;
  return label;
}
}  // namespace

LossBreakdown compute_loss(const SpanCnnOutputs& outputs, const SpanTrainingSample& sample,
                           LabelMode mode) {
  const std::size_t n = outputs.span_logits.size();
  if (sample.span_labels.size() != n || sample.span_weights.size() != n) {
    throw Error(ErrorCode::kShape, "loss shape mismatch: " + std::to_string(n) +
                                       " span outputs vs " +
                                       std::to_string(sample.span_labels.size()) + " labels / " +
                                       std::to_string(sample.span_weights.size()) + " weights");
  }
  LossBreakdown lb;
  lb.global_term = soft_cross_entropy(outputs.global_logit, apply_mode(sample.global_label, mode));
  for (std::size_t i = 0; i < n; ++i) {
    lb.span_term += sample.span_weights[i] *
                    soft_cross_entropy(outputs.span_logits[i], apply_mode(sample.span_labels[i], mode));
  }
  lb.total = lb.global_term + lb.span_term;
  return lb;
}

SpanTrainingSample augment_with_toxic_spans(const SpanTrainingSample& sample,
                                            std::span<const ToxicSpan> bank, double rate,
                                            std::mt19937_64& rng, std::size_t k,
                                            const AlphaPolicy& alpha) {
  if (rate <= 0.0) return sample;
  if (bank.empty()) throw Error(ErrorCode::kInvalidArgument, "augmentation needs a span bank");
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  if (u >= rate) return sample;

  const ToxicSpan& pick = bank[rng() % bank.size()];
  auto tokens = tokenize(sample.text);
  const std::size_t at = rng() % (tokens.size() + 1);

  std::vector<double> token_labels;
  token_labels.reserve(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    std::size_t span = t / k;
    token_labels.push_back(span < sample.span_labels.size() ? sample.span_labels[span] : 0.0);
  }
  const std::size_t inserted = count_tokens(pick.text);
  token_labels.insert(token_labels.begin() + static_cast<std::ptrdiff_t>(at), inserted,
                      pick.toxicity);

  SpanTrainingSample out;
  if (at < tokens.size()) {
    std::size_t b = tokens[at].begin;
    out.text = sample.text.substr(0, b) + pick.text + " " + sample.text.substr(b);
  } else if (tokens.empty()) {
    out.text = pick.text;
  } else {
    out.text = sample.text + " " + pick.text;
  }
  out.global_label = std::max(sample.global_label, pick.toxicity);
  for (std::size_t s = 0; s < token_labels.size(); s += k) {
    std::size_t e = std::min(s + k, token_labels.size());
    double m = *std::max_element(token_labels.begin() + static_cast<std::ptrdiff_t>(s),
                                 token_labels.begin() + static_cast<std::ptrdiff_t>(e));
    out.span_labels.push_back(m);
    out.span_weights.push_back(alpha.weight(m));
  }
  return out;
}

struct SpanCnnModel::Activations {
  std::size_t tokens = 0;
  std::vector<double> ctx_in;  // tokens x 3d
  std::vector<double> hidden;  // tokens x h
  std::vector<double> pooled;  // h
  double global_logit = 0.0;
  std::vector<double> conv_in;  // spans x k*h
  std::vector<double> conv;     // spans x C
  std::vector<double> ffn;      // spans x H
  std::vector<double> span_logits;
};

SpanCnnModel::SpanCnnModel(SpanCnnConfig config, std::vector<std::string> vocabulary,
                           std::uint64_t seed, InitMode init)
    : config_(std::move(config)), vocab_(std::move(vocabulary)) {
  config_.validate();
  if (vocab_.empty() || vocab_.front() != "<unk>") vocab_.insert(vocab_.begin(), "<unk>");
  for (std::size_t i = 0; i < vocab_.size(); ++i) index_.emplace(vocab_[i], i);
  build_layout();
  params_.assign(layout_.total, 0.0);

  std::mt19937_64 rng(seed);
  auto uniform = [&](double scale) {
    return (static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0) * scale;
  };
  auto fill = [&](std::size_t off, std::size_t count, double scale) {
    for (std::size_t i = 0; i < count; ++i) params_[off + i] = uniform(scale);
  };
  const std::size_t d = config_.embed_dim, h = config_.context_dim, c = config_.conv_channels,
                    f = config_.ffn_dim, k = config_.k;
  fill(layout_.embedding, vocab_.size() * d, 0.5);
  fill(layout_.ctx_w, h * 3 * d, 1.0 / std::sqrt(3.0 * d));
  fill(layout_.global_w, h, 1.0 / std::sqrt(double(h)));
  if (init == InitMode::kRandom) {
    fill(layout_.conv_w, c * k * h, 1.0 / std::sqrt(double(k * h)));
    fill(layout_.ffn_w, f * c, 1.0 / std::sqrt(double(c)));
    fill(layout_.out_w, f, 1.0 / std::sqrt(double(f)));
  }
}

void SpanCnnModel::build_layout() {
  const std::size_t d = config_.embed_dim, h = config_.context_dim, c = config_.conv_channels,
                    f = config_.ffn_dim, k = config_.k;
  std::size_t off = 0;
  auto take = [&](std::size_t n) {
    std::size_t at = off;
    off += n;
    return at;
  };
  layout_.embedding = take(vocab_.size() * d);
  layout_.ctx_w = take(h * 3 * d);
  layout_.ctx_b = take(h);
  layout_.global_w = take(h);
  layout_.global_b = take(1);
  layout_.conv_w = take(c * k * h);
  layout_.conv_b = take(c);
  layout_.ffn_w = take(f * c);
  layout_.ffn_b = take(f);
  layout_.out_w = take(f);
  layout_.out_b = take(1);
  layout_.total = off;
}

std::vector<std::size_t> SpanCnnModel::token_ids(const std::vector<Token>& tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const Token& t : tokens) {
    auto it = index_.find(normalize_token(t.text));
    ids.push_back(it == index_.end() ? 0 : it->second);
  }
  return ids;
}

void SpanCnnModel::run_forward(const std::vector<std::size_t>& ids, std::size_t n_spans,
                               Activations& a) const {
  const std::size_t d = config_.embed_dim, h = config_.context_dim, c = config_.conv_channels,
                    f = config_.ffn_dim, k = config_.k;
  const std::size_t T = ids.size();
  const double* p = params_.data();
  a.tokens = T;
  a.ctx_in.assign(T * 3 * d, 0.0);
  a.hidden.assign(T * h, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t part = 0; part < 3; ++part) {
      if ((part == 0 && t == 0) || (part == 2 && t + 1 == T)) continue;
      std::size_t src = t + part - 1;
      const double* e = p + layout_.embedding + ids[src] * d;
      std::copy(e, e + d, a.ctx_in.begin() + static_cast<std::ptrdiff_t>(t * 3 * d + part * d));
    }
    for (std::size_t q = 0; q < h; ++q) {
      double acc = p[layout_.ctx_b + q];
      const double* w = p + layout_.ctx_w + q * 3 * d;
      const double* x = a.ctx_in.data() + t * 3 * d;
      for (std::size_t r = 0; r < 3 * d; ++r) acc += w[r] * x[r];
      a.hidden[t * h + q] = std::tanh(acc);
    }
  }
  a.pooled.assign(h, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t q = 0; q < h; ++q) a.pooled[q] += a.hidden[t * h + q];
  for (double& v : a.pooled) v /= static_cast<double>(T);
  a.global_logit = p[layout_.global_b];
  for (std::size_t q = 0; q < h; ++q) a.global_logit += p[layout_.global_w + q] * a.pooled[q];

  const std::size_t kh = k * h;
  a.conv_in.assign(n_spans * kh, 0.0);
  a.conv.assign(n_spans * c, 0.0);
  a.ffn.assign(n_spans * f, 0.0);
  a.span_logits.assign(n_spans, 0.0);
  for (std::size_t i = 0; i < n_spans; ++i) {
    double* in = a.conv_in.data() + i * kh;
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t t = i * k + j;
      if (t >= T) break;
      std::copy(a.hidden.begin() + static_cast<std::ptrdiff_t>(t * h),
                a.hidden.begin() + static_cast<std::ptrdiff_t>((t + 1) * h), in + j * h);
    }
    for (std::size_t ch = 0; ch < c; ++ch) {
      double acc = p[layout_.conv_b + ch];
      const double* w = p + layout_.conv_w + ch * kh;
      for (std::size_t m = 0; m < kh; ++m) acc += w[m] * in[m];
      a.conv[i * c + ch] = std::tanh(acc);
    }
    for (std::size_t u = 0; u < f; ++u) {
      double acc = p[layout_.ffn_b + u];
      const double* w = p + layout_.ffn_w + u * c;
      for (std::size_t ch = 0; ch < c; ++ch) acc += w[ch] * a.conv[i * c + ch];
      a.ffn[i * f + u] = std::tanh(acc);
    }
    double logit = p[layout_.out_b];
    for (std::size_t u = 0; u < f; ++u) logit += p[layout_.out_w + u] * a.ffn[i * f + u];
    a.span_logits[i] = logit;
  }
}

SpanCnnOutputs SpanCnnModel::forward(std::string_view text) const {
  auto tokens = tokenize(text);
  if (tokens.empty()) throw Error(ErrorCode::kEmptyInput, "cannot score empty text");
  if (tokens.size() > config_.max_tokens) tokens.resize(config_.max_tokens);
  const std::size_t n = (tokens.size() + config_.k - 1) / config_.k;
  Activations a;
  run_forward(token_ids(tokens), n, a);
  return {a.global_logit, a.span_logits};
}

ScoredText SpanCnnModel::score(std::string_view text) const {
  ScoredText out;
  auto tokens = tokenize(text);
  if (tokens.empty()) throw Error(ErrorCode::kEmptyInput, "cannot score empty text");
  std::string_view scored = text;
  if (tokens.size() > config_.max_tokens) {
    out.truncated = true;
    scored = text.substr(0, tokens[config_.max_tokens - 1].end);
    log_warning("span model input truncated to " + std::to_string(config_.max_tokens) +
                " tokens");
  }
  out.segmentation = segment_spans(scored, config_.k);
  SpanCnnOutputs o = forward(scored);
  out.global = sigmoid(o.global_logit);
  out.spans.k = config_.k;
  out.spans.lambda = config_.lambda;
  for (double l : o.span_logits) out.spans.scores.push_back(sigmoid(l));
  return out;
}

LossBreakdown SpanCnnModel::loss_and_gradient(const SpanTrainingSample& sample,
                                              std::span<double> grad, LabelMode mode) const {
  if (grad.size() != params_.size())
    throw Error(ErrorCode::kShape, "gradient buffer has wrong size");
  auto tokens = tokenize(sample.text);
  if (tokens.empty()) throw Error(ErrorCode::kEmptyInput, "cannot train on empty text");
  if (tokens.size() > config_.max_tokens) tokens.resize(config_.max_tokens);
  const std::size_t d = config_.embed_dim, h = config_.context_dim, c = config_.conv_channels,
                    f = config_.ffn_dim, k = config_.k;
  const std::size_t T = tokens.size();
  const std::size_t n = (T + k - 1) / k;
  auto ids = token_ids(tokens);
  Activations a;
  run_forward(ids, n, a);
  LossBreakdown lb = compute_loss({a.global_logit, a.span_logits}, sample, mode);

  const double* p = params_.data();
  double* g = grad.data();
  std::vector<double> dh(T * h, 0.0);

  const double dg = sigmoid(a.global_logit) - apply_mode(sample.global_label, mode);
  for (std::size_t q = 0; q < h; ++q) {
    g[layout_.global_w + q] += dg * a.pooled[q];
    const double back = dg * p[layout_.global_w + q] / static_cast<double>(T);
    for (std::size_t t = 0; t < T; ++t) dh[t * h + q] += back;
  }
  g[layout_.global_b] += dg;

  const std::size_t kh = k * h;
  std::vector<double> da1(f), dc(c);
  for (std::size_t i = 0; i < n; ++i) {
    const double ds = sample.span_weights[i] *
                      (sigmoid(a.span_logits[i]) - apply_mode(sample.span_labels[i], mode));
    g[layout_.out_b] += ds;
    for (std::size_t u = 0; u < f; ++u) {
      const double fu = a.ffn[i * f + u];
      g[layout_.out_w + u] += ds * fu;
      da1[u] = ds * p[layout_.out_w + u] * (1.0 - fu * fu);
      g[layout_.ffn_b + u] += da1[u];
      for (std::size_t ch = 0; ch < c; ++ch) g[layout_.ffn_w + u * c + ch] += da1[u] * a.conv[i * c + ch];
    }
    for (std::size_t ch = 0; ch < c; ++ch) {
      double dz = 0.0;
      for (std::size_t u = 0; u < f; ++u) dz += p[layout_.ffn_w + u * c + ch] * da1[u];
      const double zc = a.conv[i * c + ch];
      dc[ch] = dz * (1.0 - zc * zc);
      g[layout_.conv_b + ch] += dc[ch];
      const double* in = a.conv_in.data() + i * kh;
      for (std::size_t m = 0; m < kh; ++m) g[layout_.conv_w + ch * kh + m] += dc[ch] * in[m];
    }
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t t = i * k + j;
      if (t >= T) break;
      for (std::size_t feat = 0; feat < h; ++feat) {
        double acc = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch) acc += p[layout_.conv_w + ch * kh + j * h + feat] * dc[ch];
        dh[t * h + feat] += acc;
      }
    }
  }

  for (std::size_t t = 0; t < T; ++t) {
    const double* x = a.ctx_in.data() + t * 3 * d;
    for (std::size_t q = 0; q < h; ++q) {
      const double hv = a.hidden[t * h + q];
      const double da = dh[t * h + q] * (1.0 - hv * hv);
      if (da == 0.0) continue;
      g[layout_.ctx_b + q] += da;
      const double* w = p + layout_.ctx_w + q * 3 * d;
      double* gw = g + layout_.ctx_w + q * 3 * d;
      for (std::size_t r = 0; r < 3 * d; ++r) gw[r] += da * x[r];
      for (std::size_t part = 0; part < 3; ++part) {
        if ((part == 0 && t == 0) || (part == 2 && t + 1 == T)) continue;
        double* ge = g + layout_.embedding + ids[t + part - 1] * d;
        for (std::size_t e = 0; e < d; ++e) ge[e] += da * w[part * d + e];
      }
    }
  }
  return lb;
}

Json SpanCnnModel::to_json() const {
  Json j;
  j["format"] = "detox-span-cnn";
  j["format_version"] = 1;
  j["tool_version"] = std::string(version());
  j["config"] = {{"k", config_.k},
                 {"lambda", config_.lambda},
                 {"tokenizer_id", config_.tokenizer_id},
                 {"embed_dim", config_.embed_dim},
                 {"context_dim", config_.context_dim},
                 {"conv_channels", config_.conv_channels},
                 {"ffn_dim", config_.ffn_dim},
                 {"max_tokens", config_.max_tokens}};
  j["vocabulary"] = vocab_;
  j["parameters"] = params_;
  return j;
}

SpanCnnModel SpanCnnModel::from_json(const Json& j) {
  try {
    if (j.at("format").get<std::string>() != "detox-span-cnn")
      throw Error(ErrorCode::kParse, "not a span model checkpoint");
    const Json& c = j.at("config");
    SpanCnnConfig cfg;
    cfg.k = c.at("k").get<std::size_t>();
    cfg.lambda = c.at("lambda").get<double>();
    cfg.tokenizer_id = c.at("tokenizer_id").get<std::string>();
    cfg.embed_dim = c.at("embed_dim").get<std::size_t>();
    cfg.context_dim = c.at("context_dim").get<std::size_t>();
    cfg.conv_channels = c.at("conv_channels").get<std::size_t>();
    cfg.ffn_dim = c.at("ffn_dim").get<std::size_t>();
    cfg.max_tokens = c.at("max_tokens").get<std::size_t>();
    if (cfg.tokenizer_id != SpanCnnConfig{}.tokenizer_id)
      throw Error(ErrorCode::kConfiguration, "unsupported tokenizer '" + cfg.tokenizer_id + "'");
    SpanCnnModel m(cfg, j.at("vocabulary").get<std::vector<std::string>>(), 0);
    auto params = j.at("parameters").get<std::vector<double>>();
    if (params.size() != m.params_.size())
      throw Error(ErrorCode::kShape, "checkpoint parameter count mismatch");
    m.params_ = std::move(params);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed span model checkpoint: ") + e.what());
  }
}

void SpanCnnModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write checkpoint '" + path.string() + "'");
  out << to_json().dump() << '\n';
  if (!out) throw Error(ErrorCode::kIo, "failed writing checkpoint '" + path.string() + "'");
}

SpanCnnModel SpanCnnModel::load(const std::filesystem::path& path,
                                std::optional<std::size_t> expected_k) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read checkpoint '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed checkpoint: ") + e.what());
  }
  SpanCnnModel m = from_json(j);
  if (expected_k && *expected_k != m.config().k) {
    throw Error(ErrorCode::kConfiguration,
                "checkpoint span length k=" + std::to_string(m.config().k) +
                    " does not match requested k=" + std::to_string(*expected_k));
  }
  return m;
}

std::vector<SpanTrainingSample> label_corpus(const std::vector<SpanCorpusItem>& corpus,
                                             std::size_t k, const AlphaPolicy& alpha,
                                             ToxicityOracle* oracle) {
  std::vector<SpanTrainingSample> out;
  out.reserve(corpus.size());
  for (std::size_t idx = 0; idx < corpus.size(); ++idx) {
    const SpanCorpusItem& item = corpus[idx];
    SpanSegmentation seg = segment_spans(item.text, k);
    SpanTrainingSample s;
    s.text = item.text;
    if ((!item.global_label || !item.span_labels) && !oracle) {
      throw Error(ErrorCode::kLabeling,
                  "sample " + std::to_string(idx) + " is unlabeled and no oracle is configured");
    }
    s.global_label = item.global_label ? *item.global_label : oracle->score(item.text);
    if (item.span_labels) {
      if (item.span_labels->size() != seg.spans.size()) {
        throw Error(ErrorCode::kShape, "sample " + std::to_string(idx) + " has " +
                                           std::to_string(item.span_labels->size()) +
                                           " span labels for " +
                                           std::to_string(seg.spans.size()) + " spans");
      }
      s.span_labels = *item.span_labels;
    } else {
      for (const Span& sp : seg.spans) s.span_labels.push_back(oracle->score(sp.text));
    }
    for (double l : s.span_labels) {
      if (!(l >= 0.0 && l <= 1.0))
        throw Error(ErrorCode::kLabeling, "span label outside [0,1] in sample " + std::to_string(idx));
      s.span_weights.push_back(alpha.weight(l));
    }
    out.push_back(std::move(s));
  }
  return out;
}

SpanAccuracy evaluate_span_model(const SpanScorer& model,
                                 const std::vector<SpanTrainingSample>& samples) {
  SpanAccuracy acc;
  std::size_t exact = 0, instance = 0, units = 0, unit_ok = 0;
  for (const auto& s : samples) {
    ScoredText st = model.score(s.text);
    auto predicted = detect_toxic_spans(st.spans.scores, model.threshold());
    std::vector<std::size_t> gold;
    for (std::size_t i = 0; i < s.span_labels.size(); ++i)
      if (is_toxic_score(s.span_labels[i])) gold.push_back(i);
    if (predicted == gold) ++exact;
    for (std::size_t i = 0; i < s.span_labels.size() && i < st.spans.scores.size(); ++i) {
      ++units;
      if ((st.spans.scores[i] >= model.threshold()) == is_toxic_score(s.span_labels[i])) ++unit_ok;
    }
    if (is_toxic_score(st.global) == is_toxic_score(s.global_label)) ++instance;
  }
  acc.samples = samples.size();
  if (!samples.empty()) {
    acc.span_exact = static_cast<double>(exact) / static_cast<double>(samples.size());
    acc.instance = static_cast<double>(instance) / static_cast<double>(samples.size());
  }
  if (units) acc.span_per_unit = static_cast<double>(unit_ok) / static_cast<double>(units);
  return acc;
}

SpanTrainResult train_span_cnn(const std::vector<SpanCorpusItem>& corpus,
                               const SpanTrainConfig& config, ToxicityOracle* oracle) {
  if (corpus.empty()) throw Error(ErrorCode::kEmptyInput, "training corpus is empty");
  config.model.validate();
  if (config.batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  if (config.augmentation_rate > 0.0 && config.span_bank.empty())
    throw Error(ErrorCode::kInvalidArgument, "augmentation_rate > 0 requires a span bank");

  std::vector<SpanTrainingSample> all = label_corpus(corpus, config.model.k, config.alpha, oracle);

  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<SpanTrainingSample> train, holdout;
  if (config.holdout_fraction > 0.0) {
    std::mt19937_64 split_rng(mix_seed(config.seed, 0x5b17));
    std::shuffle(order.begin(), order.end(), split_rng);
    auto n_hold = static_cast<std::size_t>(std::floor(config.holdout_fraction * all.size()));
    for (std::size_t i = 0; i < order.size(); ++i)
      (i < n_hold ? holdout : train).push_back(all[order[i]]);
  } else {
    train = std::move(all);
  }
  if (train.empty()) throw Error(ErrorCode::kEmptyInput, "no training samples after holdout split");

  std::vector<std::string> vocab;
  for (const auto& s : train)
    for (const auto& t : tokenize(s.text)) vocab.push_back(normalize_token(t.text));
  for (const auto& b : config.span_bank)
    for (const auto& t : tokenize(b.text)) vocab.push_back(normalize_token(t.text));
  std::sort(vocab.begin(), vocab.end());
  vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
  vocab.erase(std::remove(vocab.begin(), vocab.end(), "<unk>"), vocab.end());

  SpanCnnModel model(config.model, std::move(vocab), mix_seed(config.seed, 0x1417));
  auto params = model.parameters();
  std::vector<double> grad(params.size()), m1(params.size(), 0.0), m2(params.size(), 0.0);
  SpanTrainReport report;
  report.train_samples = train.size();
  std::size_t step = 0;

  std::vector<std::size_t> idx(train.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 order_rng(mix_seed(config.seed, epoch, 1));
    std::mt19937_64 aug_rng(mix_seed(config.seed, epoch, 2));
    std::shuffle(idx.begin(), idx.end(), order_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < idx.size(); start += config.batch_size) {
      const std::size_t end = std::min(start + config.batch_size, idx.size());
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = start; b < end; ++b) {
        SpanTrainingSample s =
            augment_with_toxic_spans(train[idx[b]], config.span_bank, config.augmentation_rate,
                                     aug_rng, config.model.k, config.alpha);
        epoch_loss += model.loss_and_gradient(s, grad, config.label_mode).total;
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      ++step;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double gi = grad[i] * scale;
        m1[i] = config.beta1 * m1[i] + (1.0 - config.beta1) * gi;
        m2[i] = config.beta2 * m2[i] + (1.0 - config.beta2) * gi * gi;
        params[i] -= config.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + config.epsilon);
      }
    }
    report.epoch_losses.push_back(epoch_loss / static_cast<double>(train.size()));
  }
  if (!holdout.empty()) report.holdout = evaluate_span_model(model, holdout);
  return {std::move(model), std::move(report)};
}

std::vector<SpanCorpusItem> read_span_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read span corpus '" + path.string() + "'");
  std::vector<SpanCorpusItem> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      auto j = Json::parse(line);
      SpanCorpusItem item;
      item.text = j.at("text").get<std::string>();
      if (auto it = j.find("global_label"); it != j.end() && !it->is_null())
        item.global_label = it->get<double>();
      if (auto it = j.find("span_labels"); it != j.end() && !it->is_null())
        item.span_labels = it->get<std::vector<double>>();
      out.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace detox
