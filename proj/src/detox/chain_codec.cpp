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

#include "detox/chain_codec.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "detox/common.hpp"
#include "detox/text.hpp"

namespace detox {

ChainBranch branch_for(bool is_toxic, bool has_context) {
  if (is_toxic) {
    return has_context ? ChainBranch::kToxicWithCont : ChainBranch::kToxicNoCont;
  }
  return has_context ? ChainBranch::kNonToxicWithCont
                     : ChainBranch::kNonToxicNoCont;
}

bool branch_is_toxic(ChainBranch branch) {
  return branch == ChainBranch::kToxicWithCont ||
         branch == ChainBranch::kToxicNoCont;
}

bool branch_has_context(ChainBranch branch) {
  return branch == ChainBranch::kToxicWithCont ||
         branch == ChainBranch::kNonToxicWithCont;
}

std::string_view branch_name(ChainBranch branch) {
  switch (branch) {
    case ChainBranch::kToxicWithCont: return "toxic_with_continuation";
    case ChainBranch::kToxicNoCont: return "toxic_without_continuation";
    case ChainBranch::kNonToxicWithCont: return "non_toxic_with_continuation";
    case ChainBranch::kNonToxicNoCont: return "non_toxic_without_continuation";
  }
  return "unknown";
}

std::optional<ChainBranch> branch_from_name(std::string_view name) {
  for (ChainBranch b : kAllBranches) {
    if (branch_name(b) == name) return b;
  }
  return std::nullopt;
}

TemplateSet TemplateSet::defaults(std::string_view placeholder) {
  TemplateSet t;
  t.placeholder = std::string(placeholder);
  ChainMarkers& m = t.markers;
  m.start = "Let's detoxify step by step.";
  m.verdict_toxic = "The text is toxic.";
  m.verdict_non_toxic = "The text is non-toxic.";
  m.mask_intro = "Mask the toxic portion of the text:";
  m.fill_intro = "Find one or several non-toxic and appropriate tokens to replace " +
                 t.placeholder +
                 " and the masked text can be rephrased into a non-toxic version:";
  m.context_toxic = "The rephrased prompt has enough context.";
  m.context_non_toxic = "It has enough context.";
  m.no_context_toxic =
      "The rephrased prompt does not have enough context, so there is no need "
      "to generate a continuation.";
  m.no_context_non_toxic =
      "The prompt does not have enough context, so there is no need to "
      "generate a continuation.";
  m.continuation = "The Continuation is:";

  const std::string d = t.delimiter;
  const std::string toxic_head = d + "{Prompt} " + d + m.start + " " + d +
                                 m.verdict_toxic + " " + d + m.mask_intro + " " +
                                 d + "{Masked Prompt} " + d + m.fill_intro + " " +
                                 d + "{Rephrased Prompt} " + d;
  const std::string non_toxic_head =
      d + "{Prompt} " + d + m.start + " " + d + m.verdict_non_toxic + " " + d;

  t.templates[static_cast<std::size_t>(ChainBranch::kToxicWithCont)] =
      toxic_head + m.context_toxic + " " + d + m.continuation + " " + d +
      "{Generation} " + d;
  t.templates[static_cast<std::size_t>(ChainBranch::kToxicNoCont)] =
      toxic_head + m.no_context_toxic;
  t.templates[static_cast<std::size_t>(ChainBranch::kNonToxicWithCont)] =
      non_toxic_head + m.context_non_toxic + " " + d + m.continuation + " " + d +
      "{Generation}" + d;
  t.templates[static_cast<std::size_t>(ChainBranch::kNonToxicNoCont)] =
      non_toxic_head + m.no_context_non_toxic;
  return t;
}

std::vector<Violation> validate_record(const DetoxChainRecord& r) {
  std::vector<Violation> out;
  if (r.is_toxic) {
    if (!r.masked_prompt) out.push_back({"masked_prompt", "masked_prompt missing"});
    if (!r.rephrased_prompt)
      out.push_back({"rephrased_prompt", "rephrased_prompt missing"});
  } else {
    if (r.masked_prompt)
      out.push_back({"masked_prompt", "masked_prompt present on non-toxic record"});
    if (r.rephrased_prompt)
      out.push_back(
          {"rephrased_prompt", "rephrased_prompt present on non-toxic record"});
  }
  if (r.has_context && !r.continuation) {
    out.push_back({"continuation", "continuation missing"});
  } else if (!r.has_context && r.continuation) {
    out.push_back({"continuation", "continuation present on no-context record"});
  }
  if (r.branch != branch_for(r.is_toxic, r.has_context)) {
    out.push_back({"branch", "branch " + std::string(branch_name(r.branch)) +
                                 " inconsistent with is_toxic/has_context"});
  }
  return out;
}

namespace {

enum class Slot { kPrompt, kMasked, kRephrased, kGeneration };

struct Segment {
  bool is_slot = false;
  Slot slot = Slot::kPrompt;
  std::string literal;
};

std::optional<Slot> slot_from_name(std::string_view name) {
  if (name == "Prompt") return Slot::kPrompt;
  if (name == "Masked Prompt") return Slot::kMasked;
  if (name == "Rephrased Prompt") return Slot::kRephrased;
  if (name == "Generation") return Slot::kGeneration;
  return std::nullopt;
}

std::vector<Segment> compile_template(const std::string& tpl) {
  std::vector<Segment> segs;
  std::string literal;
  std::vector<Slot> seen;
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] == '{') {
      std::size_t close = tpl.find('}', i);
      if (close != std::string::npos) {
        auto slot = slot_from_name(std::string_view(tpl).substr(i + 1, close - i - 1));
        if (slot) {
          if (std::find(seen.begin(), seen.end(), *slot) != seen.end())
            throw Error(ErrorCode::kInvalidArgument, "duplicate slot in template");
          if (!segs.empty() && segs.back().is_slot && literal.empty())
            throw Error(ErrorCode::kInvalidArgument, "adjacent slots in template");
          seen.push_back(*slot);
          if (!literal.empty()) segs.push_back({false, Slot::kPrompt, std::move(literal)});
          literal.clear();
          segs.push_back({true, *slot, {}});
          i = close + 1;
          continue;
        }
      }
    }
    literal.push_back(tpl[i]);
    ++i;
  }
  if (!literal.empty()) segs.push_back({false, Slot::kPrompt, std::move(literal)});
  return segs;
}

using Captures = std::map<Slot, std::string>;

struct MatchState {
  std::string_view text;
  std::string_view delimiter;
  const std::vector<Segment>* segs = nullptr;
  std::size_t furthest_pos = 0;
  std::string furthest_expected;
  bool have_failure = false;

  void note_failure(std::size_t pos, const std::string& expected) {
    if (!have_failure || pos > furthest_pos) {
      furthest_pos = pos;
      furthest_expected = expected;
      have_failure = true;
    }
  }

  bool match(std::size_t seg, std::size_t pos, Captures& caps) {
    const auto& s = *segs;
    if (seg == s.size()) {
      if (pos == text.size()) return true;
      note_failure(pos, "end of chain");
      return false;
    }
    const Segment& cur = s[seg];
    if (!cur.is_slot) {
      if (text.compare(pos, cur.literal.size(), cur.literal) == 0 &&
          pos + cur.literal.size() <= text.size()) {
        return match(seg + 1, pos + cur.literal.size(), caps);
      }
      note_failure(pos, cur.literal);
      return false;
    }
    if (seg + 1 == s.size()) {
      std::string_view rest = text.substr(pos);
      if (rest.find(delimiter) != std::string_view::npos) {
        note_failure(pos, "slot without delimiter");
        return false;
      }
      caps[cur.slot] = std::string(rest);
      return true;
    }
    const std::string& next = s[seg + 1].literal;
    for (std::size_t q = text.find(next, pos); q != std::string_view::npos;
         q = text.find(next, q + 1)) {
      std::string_view cap = text.substr(pos, q - pos);
      if (cap.find(delimiter) != std::string_view::npos) break;
      caps[cur.slot] = std::string(cap);
      if (match(seg + 2, q + next.size(), caps)) return true;
    }
    caps.erase(cur.slot);
    note_failure(pos, next);
    return false;
  }
};

std::string excerpt(std::string_view text, std::size_t pos) {
  if (pos >= text.size()) return "";
  return std::string(text.substr(pos, 40));
}

DetoxChainRecord record_from_captures(ChainBranch branch, Captures& caps) {
  DetoxChainRecord r;
  r.branch = branch;
  r.is_toxic = branch_is_toxic(branch);
  r.has_context = branch_has_context(branch);
  r.prompt = caps[Slot::kPrompt];
  if (r.is_toxic) {
    r.masked_prompt = caps[Slot::kMasked];
    r.rephrased_prompt = caps[Slot::kRephrased];
  }
  if (r.has_context) r.continuation = caps[Slot::kGeneration];
  return r;
}

PartialChain partial_from_record(const DetoxChainRecord& r) {
  PartialChain p;
  p.prompt = r.prompt;
  p.is_toxic = r.is_toxic;
  p.masked_prompt = r.masked_prompt;
  p.rephrased_prompt = r.rephrased_prompt;
  p.has_context = r.has_context;
  p.continuation = r.continuation;
  return p;
}

ChainParseResult parse_strict(std::string_view text, const TemplateSet& t) {
  ChainParseResult result;
  std::optional<MatchState> best;
  for (ChainBranch b : kAllBranches) {
    auto segs = compile_template(t.for_branch(b));
    MatchState st;
    st.text = text;
    st.delimiter = t.delimiter;
    st.segs = &segs;
    Captures caps;
    if (st.match(0, 0, caps)) {
      DetoxChainRecord r = record_from_captures(b, caps);
      result.partial = partial_from_record(r);
      result.record = std::move(r);
      result.complete = true;
      return result;
    }
    if (!best || st.furthest_pos > best->furthest_pos) best = st;
  }
  ParseDiagnostic d;
  d.kind = DiagnosticKind::kMismatch;
  d.position = best ? best->furthest_pos : 0;
  d.expected = best ? best->furthest_expected : "";
  d.found = excerpt(text, d.position);
  result.diagnostics.push_back(std::move(d));
  return result;
}

bool is_ws(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Case-insensitive search where each space in `phrase` matches a run of one
// or more whitespace characters.
std::optional<std::pair<std::size_t, std::size_t>> find_flexible(
    std::string_view text, std::string_view phrase, std::size_t from) {
  for (std::size_t s = from; s < text.size(); ++s) {
    std::size_t i = s;
    std::size_t j = 0;
    bool ok = true;
    while (j < phrase.size()) {
      if (phrase[j] == ' ') {
        if (i >= text.size() || !is_ws(text[i])) {
          ok = false;
          break;
        }
        while (i < text.size() && is_ws(text[i])) ++i;
        while (j < phrase.size() && phrase[j] == ' ') ++j;
        continue;
      }
      if (i >= text.size() ||
          std::tolower(static_cast<unsigned char>(text[i])) !=
              std::tolower(static_cast<unsigned char>(phrase[j]))) {
        ok = false;
        break;
      }
      ++i;
      ++j;
    }
    if (ok) return std::make_pair(s, i);
  }
  return std::nullopt;
}

enum class MarkerKind {
  kStart,
  kVerdictToxic,
  kVerdictNonToxic,
  kMaskIntro,
  kFillIntro,
  kContextToxic,
  kContextNonToxic,
  kNoContextToxic,
  kNoContextNonToxic,
  kContinuation,
};

int marker_rank(MarkerKind k) {
  switch (k) {
    case MarkerKind::kStart: return 0;
    case MarkerKind::kVerdictToxic:
    case MarkerKind::kVerdictNonToxic: return 1;
    case MarkerKind::kMaskIntro: return 2;
    case MarkerKind::kFillIntro: return 3;
    case MarkerKind::kContextToxic:
    case MarkerKind::kContextNonToxic:
    case MarkerKind::kNoContextToxic:
    case MarkerKind::kNoContextNonToxic: return 4;
    case MarkerKind::kContinuation: return 5;
  }
  return 6;
}

struct FoundMarker {
  MarkerKind kind;
  std::string phrase;
  std::size_t begin;
  std::size_t end;
};

std::string clean_slot(std::string_view raw, std::string_view delim) {
  std::string_view s = trim(raw);
  bool changed = true;
  while (changed) {
    changed = false;
    if (!delim.empty() && s.starts_with(delim)) {
      s.remove_prefix(delim.size());
      s = trim(s);
      changed = true;
    }
    if (!delim.empty() && s.ends_with(delim)) {
      s.remove_suffix(delim.size());
      s = trim(s);
      changed = true;
    }
  }
  return std::string(s);
}

ChainParseResult parse_lenient(std::string_view text, const TemplateSet& t) {
  ChainParseResult strict = parse_strict(text, t);
  if (strict.complete) return strict;

  ChainParseResult result;
  auto& diags = result.diagnostics;
  const ChainMarkers& m = t.markers;
  const std::vector<std::pair<MarkerKind, const std::string*>> kinds = {
      {MarkerKind::kStart, &m.start},
      {MarkerKind::kVerdictToxic, &m.verdict_toxic},
      {MarkerKind::kVerdictNonToxic, &m.verdict_non_toxic},
      {MarkerKind::kMaskIntro, &m.mask_intro},
      {MarkerKind::kFillIntro, &m.fill_intro},
      {MarkerKind::kContextToxic, &m.context_toxic},
      {MarkerKind::kContextNonToxic, &m.context_non_toxic},
      {MarkerKind::kNoContextToxic, &m.no_context_toxic},
      {MarkerKind::kNoContextNonToxic, &m.no_context_non_toxic},
      {MarkerKind::kContinuation, &m.continuation},
  };

  std::vector<FoundMarker> found;
  for (const auto& [kind, phrase] : kinds) {
    auto hit = find_flexible(text, *phrase, 0);
    if (!hit) continue;
    found.push_back({kind, *phrase, hit->first, hit->second});
    for (auto extra = find_flexible(text, *phrase, hit->second); extra;
         extra = find_flexible(text, *phrase, extra->second)) {
      diags.push_back({DiagnosticKind::kDuplicateMarker, extra->first, *phrase,
                       excerpt(text, extra->first)});
    }
  }
  std::sort(found.begin(), found.end(),
            [](const FoundMarker& a, const FoundMarker& b) { return a.begin < b.begin; });

  for (std::size_t i = 1; i < found.size(); ++i) {
    if (marker_rank(found[i].kind) < marker_rank(found[i - 1].kind)) {
      diags.push_back({DiagnosticKind::kOutOfOrder, found[i].begin, found[i].phrase,
                       excerpt(text, found[i].begin)});
    }
  }

  auto locate = [&](MarkerKind k) -> const FoundMarker* {
    for (const auto& f : found)
      if (f.kind == k) return &f;
    return nullptr;
  };
  auto slot_after = [&](const FoundMarker& f) {
    std::size_t stop = text.size();
    for (const auto& g : found) {
      if (g.begin >= f.end) {
        stop = g.begin;
        break;
      }
    }
    return clean_slot(text.substr(f.end, stop - f.end), t.delimiter);
  };
  auto missing = [&](const std::string& phrase) {
    diags.push_back({DiagnosticKind::kMissingMarker, text.size(), phrase, ""});
  };

  PartialChain& p = result.partial;
  const FoundMarker* start = locate(MarkerKind::kStart);
  if (!start) missing(m.start);
  {
    std::size_t first = found.empty() ? text.size() : found.front().begin;
    std::string prompt = clean_slot(text.substr(0, first), t.delimiter);
    if (!prompt.empty()) {
      p.prompt = std::move(prompt);
    } else {
      diags.push_back({DiagnosticKind::kMissingSlot, 0, "{Prompt}", ""});
    }
  }

  const FoundMarker* vt = locate(MarkerKind::kVerdictToxic);
  const FoundMarker* vn = locate(MarkerKind::kVerdictNonToxic);
  if (vt && vn) {
    diags.push_back({DiagnosticKind::kContradiction, std::max(vt->begin, vn->begin),
                     "single toxicity verdict", "both verdicts present"});
    p.is_toxic = vt->begin < vn->begin;
  } else if (vt) {
    p.is_toxic = true;
  } else if (vn) {
    p.is_toxic = false;
  } else {
    missing(m.verdict_toxic);
  }

  const FoundMarker* mask = locate(MarkerKind::kMaskIntro);
  const FoundMarker* fill = locate(MarkerKind::kFillIntro);
  if (mask) p.masked_prompt = slot_after(*mask);
  if (fill) p.rephrased_prompt = slot_after(*fill);
  if (p.is_toxic.value_or(false)) {
    if (!mask) missing(m.mask_intro);
    if (!fill) missing(m.fill_intro);
  } else if (p.is_toxic && (mask || fill)) {
    const FoundMarker* f = mask ? mask : fill;
    diags.push_back({DiagnosticKind::kContradiction, f->begin,
                     "no masking steps on a non-toxic verdict", f->phrase});
  }

  const FoundMarker* ct = locate(MarkerKind::kContextToxic);
  const FoundMarker* cn = locate(MarkerKind::kContextNonToxic);
  const FoundMarker* nt = locate(MarkerKind::kNoContextToxic);
  const FoundMarker* nn = locate(MarkerKind::kNoContextNonToxic);
  const FoundMarker* yes = ct ? ct : cn;
  const FoundMarker* no = nt ? nt : nn;
  const FoundMarker* cont = locate(MarkerKind::kContinuation);
  if (cont) p.continuation = slot_after(*cont);

  if (yes && no) {
    diags.push_back({DiagnosticKind::kContradiction, std::max(yes->begin, no->begin),
                     "single context verdict", "both context verdicts present"});
    p.has_context = yes->begin < no->begin;
  } else if (yes) {
    p.has_context = true;
  } else if (no) {
    p.has_context = false;
  } else if (cont) {
    missing(m.context_toxic);
    p.has_context = true;
  } else {
    missing(m.context_toxic);
  }
  if (no && cont) {
    diags.push_back({DiagnosticKind::kContradiction, cont->begin,
                     "no continuation after a no-context verdict", cont->phrase});
  }
  if (yes && !cont) missing(m.continuation);
  if (p.is_toxic) {
    const FoundMarker* ctx = yes ? yes : no;
    if (ctx) {
      bool toxic_form = ctx->kind == MarkerKind::kContextToxic ||
                        ctx->kind == MarkerKind::kNoContextToxic;
      if (toxic_form != *p.is_toxic) {
        diags.push_back({DiagnosticKind::kMismatch, ctx->begin,
                         "context phrase matching the toxicity verdict", ctx->phrase});
      }
    }
  }

  if (p.is_toxic && p.has_context) {
    bool ok = true;
    if (*p.is_toxic && (!p.masked_prompt || !p.rephrased_prompt)) ok = false;
    if (*p.has_context && !p.continuation) ok = false;
    if (ok) {
      DetoxChainRecord r;
      r.prompt = p.prompt.value_or("");
      r.is_toxic = *p.is_toxic;
      r.has_context = *p.has_context;
      r.branch = branch_for(r.is_toxic, r.has_context);
      if (r.is_toxic) {
        r.masked_prompt = p.masked_prompt;
        r.rephrased_prompt = p.rephrased_prompt;
      }
      if (r.has_context) r.continuation = p.continuation;
      result.record = std::move(r);
    }
  }
  std::stable_sort(diags.begin(), diags.end(),
                   [](const ParseDiagnostic& a, const ParseDiagnostic& b) {
                     return a.position < b.position;
                   });
  return result;
}

}  // namespace

std::string render_chain(const DetoxChainRecord& record, const TemplateSet& t) {
  auto violations = validate_record(record);
  if (!violations.empty()) {
    throw Error(ErrorCode::kInvalidRecord,
                "invalid record '" + record.id + "': " + violations.front().message);
  }
  auto check = [&](const std::string& value, std::string_view field) {
    if (value.find(t.delimiter) != std::string::npos) {
      throw Error(ErrorCode::kInvalidRecord, "invalid record '" + record.id + "': " +
                                                 std::string(field) +
                                                 " contains the delimiter");
    }
  };
  check(record.prompt, "prompt");
  if (record.masked_prompt) check(*record.masked_prompt, "masked_prompt");
  if (record.rephrased_prompt) check(*record.rephrased_prompt, "rephrased_prompt");
  if (record.continuation) check(*record.continuation, "continuation");

  std::string out;
  for (const Segment& seg : compile_template(t.for_branch(record.branch))) {
    if (!seg.is_slot) {
      out += seg.literal;
      continue;
    }
    switch (seg.slot) {
      case Slot::kPrompt: out += record.prompt; break;
      case Slot::kMasked: out += record.masked_prompt.value_or(""); break;
      case Slot::kRephrased: out += record.rephrased_prompt.value_or(""); break;
      case Slot::kGeneration: out += record.continuation.value_or(""); break;
    }
  }
  return out;
}

std::string_view diagnostic_kind_name(DiagnosticKind kind) {
  switch (kind) {
    case DiagnosticKind::kMismatch: return "mismatch";
    case DiagnosticKind::kMissingMarker: return "missing_marker";
    case DiagnosticKind::kDuplicateMarker: return "duplicate_marker";
    case DiagnosticKind::kOutOfOrder: return "out_of_order";
    case DiagnosticKind::kContradiction: return "contradiction";
    case DiagnosticKind::kMissingSlot: return "missing_slot";
  }
  return "unknown";
}

ChainParseResult parse_chain(std::string_view text, const TemplateSet& templates,
                             ParseMode mode) {
  return mode == ParseMode::kStrict ? parse_strict(text, templates)
                                    : parse_lenient(text, templates);
}

namespace {
Json opt(const std::optional<std::string>& v) {
  return v ? Json(*v) : Json(nullptr);
}
std::optional<std::string> opt_string(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}
}  // namespace

Json record_to_json(const DetoxChainRecord& r, const TemplateSet& t) {
  Json j;
  j["id"] = r.id;
  j["branch"] = branch_name(r.branch);
  j["prompt"] = r.prompt;
  j["is_toxic"] = r.is_toxic;
  j["masked_prompt"] = opt(r.masked_prompt);
  j["rephrased_prompt"] = opt(r.rephrased_prompt);
  j["has_context"] = r.has_context;
  j["continuation"] = opt(r.continuation);
  j["chain_text"] = render_chain(r, t);
  return j;
}

DetoxChainRecord record_from_json(const Json& j) {
  try {
    DetoxChainRecord r;
    r.id = j.value("id", "");
    r.prompt = j.at("prompt").get<std::string>();
    r.is_toxic = j.at("is_toxic").get<bool>();
    r.has_context = j.at("has_context").get<bool>();
    r.masked_prompt = opt_string(j, "masked_prompt");
    r.rephrased_prompt = opt_string(j, "rephrased_prompt");
    r.continuation = opt_string(j, "continuation");
    r.branch = branch_for(r.is_toxic, r.has_context);
    if (auto it = j.find("branch"); it != j.end() && !it->is_null()) {
      auto b = branch_from_name(it->get<std::string>());
      if (!b) throw Error(ErrorCode::kParse, "unknown branch '" + it->get<std::string>() + "'");
      r.branch = *b;
    }
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed chain record: ") + e.what());
  }
}

Json parse_result_to_json(const ChainParseResult& res) {
  Json j;
  j["complete"] = res.complete;
  if (res.record) {
    Json r;
    r["branch"] = branch_name(res.record->branch);
    r["prompt"] = res.record->prompt;
    r["is_toxic"] = res.record->is_toxic;
    r["masked_prompt"] = opt(res.record->masked_prompt);
    r["rephrased_prompt"] = opt(res.record->rephrased_prompt);
    r["has_context"] = res.record->has_context;
    r["continuation"] = opt(res.record->continuation);
    j["record"] = r;
  } else {
    j["record"] = nullptr;
  }
  Json p;
  const PartialChain& pc = res.partial;
  p["prompt"] = opt(pc.prompt);
  p["is_toxic"] = pc.is_toxic ? Json(*pc.is_toxic) : Json(nullptr);
  p["masked_prompt"] = opt(pc.masked_prompt);
  p["rephrased_prompt"] = opt(pc.rephrased_prompt);
  p["has_context"] =
      pc.has_context ? Json(*pc.has_context) : Json(nullptr);
  p["continuation"] = opt(pc.continuation);
  j["partial"] = p;
  auto diags = Json::array();
  for (const auto& d : res.diagnostics) {
    diags.push_back({{"kind", diagnostic_kind_name(d.kind)},
                     {"position", d.position},
                     {"expected", d.expected},
                     {"found", d.found}});
  }
  j["diagnostics"] = diags;
  return j;
}

}  // namespace detox
