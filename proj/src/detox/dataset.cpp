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

#include "detox/dataset.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

#include "detox/text.hpp"

namespace detox {

SourceFormat source_format_from_name(std::string_view name) {
  if (name == "rtp-jsonl") return SourceFormat::kRtpJsonl;
  if (name == "jigsaw-csv") return SourceFormat::kJigsawCsv;
  throw Error(ErrorCode::kInvalidArgument, "unknown source format '" + std::string(name) + "'");
}

std::string_view source_format_name(SourceFormat format) {
  return format == SourceFormat::kRtpJsonl ? "rtp-jsonl" : "jigsaw-csv";
}

Json IngestReport::to_json() const {
  return Json{{"rows", rows},   {"accepted", accepted}, {"malformed", malformed},
              {"train", train}, {"test", test}};
}

std::vector<std::vector<std::string>> parse_csv(std::string_view data) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const char c = data[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < data.size() && data[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < data.size() && data[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw Error(ErrorCode::kParse, "unterminated quoted CSV field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

void assign_split(std::vector<PromptRecord>& prompts, SplitRatio ratio, std::uint64_t seed) {
  const unsigned total = ratio.train + ratio.test;
  if (total == 0) throw Error(ErrorCode::kConfiguration, "split ratio must not be 0:0");
  std::vector<std::size_t> order(prompts.size());
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates over a portable hash stream, so membership does not depend
  // on the standard library's shuffle.
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = mix_seed(seed, 0x5711ULL, i) % i;
    std::swap(order[i - 1], order[j]);
  }
  const std::size_t n_train = (prompts.size() * ratio.train + total / 2) / total;
  for (std::size_t r = 0; r < order.size(); ++r)
    prompts[order[r]].split = r < n_train ? "train" : "test";
}

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string id_string(const Json& j) { return j.is_string() ? j.get<std::string>() : j.dump(); }

void ingest_rtp(const std::string& data, IngestResult& out) {
  std::istringstream in(data);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    ++out.report.rows;
    try {
      const Json j = Json::parse(line);
      const Json& prompt = j.at("prompt");
      PromptRecord r;
      r.text = prompt.at("text").get<std::string>();
      if (auto t = prompt.find("toxicity"); t != prompt.end() && !t->is_null())
        r.toxicity = t->get<double>();
      if (auto f = j.find("id"); f != j.end() && !f->is_null())
        r.id = id_string(*f);
      else if (auto fn = j.find("filename"); fn != j.end() && !fn->is_null())
        r.id = id_string(*fn);
      else
        r.id = "rtp-" + std::to_string(lineno);
      if (trim(r.text).empty()) throw Error(ErrorCode::kInvalidRecord, "empty prompt text");
      if (r.toxicity && !(*r.toxicity >= 0.0 && *r.toxicity <= 1.0))
        throw Error(ErrorCode::kInvalidRecord, "toxicity outside [0,1]");
      out.prompts.push_back(std::move(r));
    } catch (const std::exception& e) {
      ++out.report.malformed;
      log_warning("skipping malformed RTP line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void ingest_jigsaw(const std::string& data, IngestResult& out) {
  const auto rows = parse_csv(data);
  if (rows.empty()) return;
  const auto& header = rows.front();
  auto column = [&](std::string_view name) -> std::ptrdiff_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (to_lower(trim(header[i])) == name) return static_cast<std::ptrdiff_t>(i);
    return -1;
  };
  const auto id_col = column("id");
  const auto text_col = column("comment_text");
  const auto label_col = column("toxic");
  if (text_col < 0 || label_col < 0)
    throw Error(ErrorCode::kParse, "jigsaw CSV needs 'comment_text' and 'toxic' columns");
  for (std::size_t r = 1; r < rows.size(); ++r) {
    ++out.report.rows;
    const auto& row = rows[r];
    const auto need = static_cast<std::size_t>(std::max({id_col, text_col, label_col}));
    std::string label = row.size() > need ? std::string(trim(row[label_col])) : "";
    if (row.size() <= need || (label != "0" && label != "1") || trim(row[text_col]).empty()) {
      ++out.report.malformed;
      log_warning("skipping malformed JigSaw row " + std::to_string(r + 1));
      continue;
    }
    PromptRecord p;
    p.id = id_col >= 0 ? row[id_col] : "jigsaw-" + std::to_string(r);
    p.text = row[text_col];
    p.toxicity = label == "1" ? 1.0 : 0.0;
    out.prompts.push_back(std::move(p));
  }
}

}  // namespace

IngestResult ingest(const std::filesystem::path& source, SourceFormat format, SplitRatio ratio,
                    std::uint64_t seed) {
  const std::string data = read_file(source);
  IngestResult out;
  if (format == SourceFormat::kRtpJsonl)
    ingest_rtp(data, out);
  else
    ingest_jigsaw(data, out);
  if (out.report.rows > 0 && out.report.malformed * 10 > out.report.rows)
    throw Error(ErrorCode::kParse, std::to_string(out.report.malformed) + " of " +
                                       std::to_string(out.report.rows) +
                                       " rows are malformed (limit 10%)");
  assign_split(out.prompts, ratio, seed);
  out.report.accepted = out.prompts.size();
  for (const auto& p : out.prompts) (p.split == "train" ? out.report.train : out.report.test)++;
  return out;
}

}  // namespace detox
