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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "detox/config.hpp"
#include "detox/dataset.hpp"

using namespace detox;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
  auto dir = std::filesystem::temp_directory_path() / "detox_dataset_test";
  std::filesystem::create_directories(dir);
  auto p = dir / name;
  std::ofstream(p, std::ios::binary) << content;
  return p;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

std::vector<PromptRecord> numbered(std::size_t n) {
  std::vector<PromptRecord> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i].id = std::to_string(i);
  return v;
}

}  // namespace

TEST(Csv, QuotesCommasAndNewlines) {
  auto rows = parse_csv("a,b,c\n\"x, y\",\"say \"\"hi\"\"\",\"line1\nline2\"\r\n1,,3");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1][0], "x, y");
  EXPECT_EQ(rows[1][1], "say \"hi\"");
  EXPECT_EQ(rows[1][2], "line1\nline2");
  EXPECT_EQ(rows[2], (std::vector<std::string>{"1", "", "3"}));
  EXPECT_EQ(code_of([] { parse_csv("\"open"); }), ErrorCode::kParse);
}

TEST(Ingest, RtpFieldMapping) {
  auto p = write_temp("rtp.jsonl",
                      R"({"filename": "f1.txt", "prompt": {"text": "X", "toxicity": 0.7}})"
                      "\n"
                      R"({"id": 12, "prompt": {"text": "Y", "toxicity": null}})"
                      "\n");
  auto r = ingest(p, SourceFormat::kRtpJsonl);
  ASSERT_EQ(r.prompts.size(), 2u);
  EXPECT_EQ(r.prompts[0].text, "X");
  EXPECT_EQ(*r.prompts[0].toxicity, 0.7);
  EXPECT_EQ(r.prompts[0].id, "f1.txt");
  EXPECT_EQ(r.prompts[1].id, "12");
  EXPECT_FALSE(r.prompts[1].toxicity);
  EXPECT_EQ(r.report.accepted, 2u);
}

TEST(Ingest, JigsawBinaryLabels) {
  auto p = write_temp("jig.csv",
                      "id,comment_text,toxic,severe_toxic\n"
                      "a1,\"You are, frankly, awful\",1,0\n"
                      "a2,hello there,0,0\n");
  auto r = ingest(p, SourceFormat::kJigsawCsv);
  ASSERT_EQ(r.prompts.size(), 2u);
  EXPECT_EQ(r.prompts[0].text, "You are, frankly, awful");
  EXPECT_EQ(*r.prompts[0].toxicity, 1.0);
  EXPECT_EQ(*r.prompts[1].toxicity, 0.0);
  EXPECT_EQ(r.prompts[1].id, "a2");
  auto bad = write_temp("jig_bad.csv", "text,label\nx,1\n");
  EXPECT_EQ(code_of([&] { ingest(bad, SourceFormat::kJigsawCsv); }), ErrorCode::kParse);
}

TEST(Ingest, MalformedRowsSkippedUpToTenPercent) {
  std::string ok;
  for (int i = 0; i < 20; ++i) ok += R"({"prompt": {"text": "t)" + std::to_string(i) + "\"}}\n";
  std::vector<std::string> warnings;
  set_log_sink([&](std::string_view m) { warnings.emplace_back(m); });
  auto two_bad = write_temp("two_bad.jsonl", ok + "not json\n" + R"({"prompt": {"text": "x", "toxicity": 3}})" "\n");
  auto r = ingest(two_bad, SourceFormat::kRtpJsonl);
  EXPECT_EQ(r.report.rows, 22u);
  EXPECT_EQ(r.report.malformed, 2u);
  EXPECT_EQ(r.prompts.size(), 20u);
  EXPECT_EQ(warnings.size(), 2u);
  auto three_bad = write_temp("three_bad.jsonl", ok + "x\ny\nz\n");
  EXPECT_EQ(code_of([&] { ingest(three_bad, SourceFormat::kRtpJsonl); }), ErrorCode::kParse);
  set_log_sink(nullptr);
  EXPECT_EQ(code_of([] { ingest("/nonexistent/file.jsonl", SourceFormat::kRtpJsonl); }),
            ErrorCode::kIo);
}

TEST(Split, NineToOneAndDeterministic) {
  auto a = numbered(1000), b = numbered(1000), c = numbered(1000);
  assign_split(a, {}, 5);
  assign_split(b, {}, 5);
  assign_split(c, {}, 6);
  std::size_t train = 0, differs = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].split, b[i].split);
    train += a[i].split == "train";
    differs += a[i].split != c[i].split;
  }
  EXPECT_EQ(train, 900u);
  EXPECT_GT(differs, 0u);
  auto small = numbered(15);
  assign_split(small, {}, 1);
  std::size_t small_train = 0;
  for (const auto& p : small) small_train += p.split == "train";
  EXPECT_EQ(small_train, 14u);  // 13.5 rounds half up
  EXPECT_EQ(code_of([] {
              auto v = numbered(3);
              assign_split(v, {0, 0}, 1);
            }),
            ErrorCode::kConfiguration);
}

TEST(SourceFormat, Names) {
  EXPECT_EQ(source_format_from_name("rtp-jsonl"), SourceFormat::kRtpJsonl);
  EXPECT_EQ(source_format_name(SourceFormat::kJigsawCsv), "jigsaw-csv");
  EXPECT_THROW(source_format_from_name("xml"), Error);
}

TEST(Config, DefaultsRoundTripThroughJson) {
  RunConfig d;
  auto j = d.to_json();
  EXPECT_EQ(RunConfig::from_json(j).to_json(), j);
  EXPECT_EQ(j["pipeline"]["max_iterations"], 5);
  EXPECT_EQ(j["split_ratio"], Json::array({9, 1}));
}

TEST(Config, FlagsBeatFileBeatDefaults) {
  auto file = write_temp("cfg.json", R"({"seed": 3, "pipeline": {"k": 3, "lambda": 0.4},
                                          "sampling": {"top_p": 0.8}})");
  auto from_file = load_run_config(file);
  EXPECT_EQ(from_file.seed, 3u);
  EXPECT_EQ(from_file.pipeline.k, 3u);
  EXPECT_DOUBLE_EQ(from_file.pipeline.lambda, 0.4);
  EXPECT_DOUBLE_EQ(from_file.pipeline.sampling.top_p, 0.8);
  EXPECT_EQ(from_file.pipeline.max_iterations, 5);

  auto both = load_run_config(file, {{"seed", 9}, {"pipeline", {{"k", 4}}}});
  EXPECT_EQ(both.seed, 9u);
  EXPECT_EQ(both.pipeline.k, 4u);
  EXPECT_DOUBLE_EQ(both.pipeline.lambda, 0.4);
}

TEST(Config, OracleShorthandAndLexiconReplacement) {
  auto c = load_run_config(std::nullopt, {{"oracle", "remote"}, {"mock_lexicon", {{"bad", 0.9}}}});
  EXPECT_EQ(c.oracles.toxicity, OracleKind::kRemote);
  EXPECT_EQ(c.oracles.chat, OracleKind::kRemote);
  EXPECT_EQ(c.mock_lexicon, (std::map<std::string, double>{{"bad", 0.9}}));
}

TEST(Config, UnknownKeysAndBadValuesAreConfigurationErrors) {
  EXPECT_EQ(code_of([] { load_run_config(std::nullopt, {{"sed", 1}}); }), ErrorCode::kConfiguration);
  EXPECT_EQ(code_of([] { load_run_config(std::nullopt, {{"pipeline", {{"kk", 1}}}}); }),
            ErrorCode::kConfiguration);
  EXPECT_EQ(code_of([] { load_run_config(std::nullopt, {{"pipeline", {{"k", "two"}}}}); }),
            ErrorCode::kConfiguration);
  EXPECT_EQ(code_of([] { load_run_config(std::nullopt, {{"pipeline", {{"k", 0}}}}); }),
            ErrorCode::kConfiguration);
  EXPECT_EQ(code_of([] { load_run_config(std::nullopt, {{"oracle", "cloud"}}); }),
            ErrorCode::kConfiguration);
  EXPECT_EQ(code_of([] { load_run_config(std::filesystem::path("/nonexistent.json")); }),
            ErrorCode::kConfiguration);
  auto broken = write_temp("broken.json", "{nope");
  EXPECT_EQ(code_of([&] { load_run_config(broken); }), ErrorCode::kConfiguration);
}

TEST(Config, SpanTrainConfigCarriesSettings) {
  auto c = load_run_config(std::nullopt, {{"seed", 4},
                                          {"pipeline", {{"k", 3}, {"lambda", 0.25}}},
                                          {"train", {{"augmentation_rate", 0.5}, {"epochs", 2}}}});
  auto t = c.span_train_config();
  EXPECT_EQ(t.model.k, 3u);
  EXPECT_DOUBLE_EQ(t.model.lambda, 0.25);
  EXPECT_DOUBLE_EQ(t.augmentation_rate, 0.5);
  EXPECT_EQ(t.epochs, 2u);
  EXPECT_EQ(t.seed, 4u);
  EXPECT_DOUBLE_EQ(t.alpha.toxic, 2.0);
}
