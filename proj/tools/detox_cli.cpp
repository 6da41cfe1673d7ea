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

// detox-chain: command-line front end over the C library interface.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "detox/detox.h"

namespace {

using Json = nlohmann::ordered_json;

volatile std::sig_atomic_t g_interrupts = 0;

extern "C" void on_sigint(int) {
  g_interrupts = g_interrupts + 1;
  detox_request_cancel();
  // A second Ctrl-C falls through to the default handler.
  if (g_interrupts > 1) std::signal(SIGINT, SIG_DFL);
}

void print_error(const std::string& kind, int code, const std::string& message) {
  Json j{{"error", kind}, {"code", code}, {"message", message}};
  std::cerr << j.dump() << std::endl;
}

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k;
  std::optional<double> lambda;
  std::optional<int> max_iters;
  std::optional<double> top_p;
  std::optional<double> temperature;
  std::optional<std::size_t> num_samples;
  std::optional<std::string> oracle;
  std::optional<std::string> placeholder;
  std::optional<std::size_t> threads;
  std::optional<std::string> input, output, model, cache, report;
  // train-span
  std::optional<std::size_t> epochs;
  std::optional<double> augmentation_rate;
  // command arguments
  std::optional<std::string> text, text_file, source, format, gold, edit_mode;
  bool strict = false;
  bool table = false;
};

Json build_overrides(const Flags& f) {
  Json o = Json::object();
  if (f.seed) o["seed"] = *f.seed;
  if (f.oracle) o["oracle"] = *f.oracle;
  if (f.k) o["pipeline"]["k"] = *f.k;
  if (f.lambda) o["pipeline"]["lambda"] = *f.lambda;
  if (f.max_iters) o["pipeline"]["max_iterations"] = *f.max_iters;
  if (f.placeholder) o["pipeline"]["placeholder"] = *f.placeholder;
  if (f.threads) o["pipeline"]["threads"] = *f.threads;
  if (f.top_p) o["sampling"]["top_p"] = *f.top_p;
  if (f.temperature) o["sampling"]["temperature"] = *f.temperature;
  if (f.num_samples) o["sampling"]["num_samples"] = *f.num_samples;
  if (f.input) o["paths"]["input"] = *f.input;
  if (f.output) o["paths"]["output"] = *f.output;
  if (f.model) o["paths"]["model"] = *f.model;
  if (f.cache) o["paths"]["cache"] = *f.cache;
  if (f.report) o["paths"]["report"] = *f.report;
  if (f.epochs) o["train"]["epochs"] = *f.epochs;
  if (f.augmentation_rate) o["train"]["augmentation_rate"] = *f.augmentation_rate;
  return o;
}

Json build_args(const Flags& f) {
  Json a = Json::object();
  if (f.text) a["text"] = *f.text;
  if (f.text_file) {
    std::ifstream in(*f.text_file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + *f.text_file + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string t = ss.str();
    while (!t.empty() && (t.back() == '\n' || t.back() == '\r')) t.pop_back();
    a["text"] = t;
  }
  if (f.source) a["source"] = *f.source;
  if (f.format) a["format"] = *f.format;
  if (f.gold) a["gold"] = *f.gold;
  if (f.edit_mode) a["edit_mode"] = *f.edit_mode;
  if (f.strict) a["mode"] = "strict";
  return a;
}

void add_common(CLI::App& cmd, Flags& f) {
  cmd.add_option("--config", f.config, "JSON run configuration file");
  cmd.add_option("--seed", f.seed, "Random seed");
  cmd.add_option("--k", f.k, "Span length in tokens");
  cmd.add_option("--lambda", f.lambda, "Toxic span threshold");
  cmd.add_option("--max-iters", f.max_iters, "Maximum generation attempts per stage (K)");
  cmd.add_option("--top-p", f.top_p, "Nucleus sampling mass");
  cmd.add_option("--temperature", f.temperature, "Sampling temperature");
  cmd.add_option("--num-samples", f.num_samples, "Samples per prompt");
  cmd.add_option("--oracle", f.oracle, "Backend for every oracle")
      ->check(CLI::IsMember({"mock", "remote"}));
  cmd.add_option("--placeholder", f.placeholder, "Mask placeholder literal");
  cmd.add_option("--threads", f.threads, "Worker threads");
  cmd.add_option("--input", f.input, "Input file");
  cmd.add_option("--output", f.output, "Output file");
  cmd.add_option("--model", f.model, "Span model checkpoint");
  cmd.add_option("--cache", f.cache, "Toxicity score cache (JSON lines)");
  cmd.add_option("--report", f.report, "Run report path");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Build and evaluate step-by-step detoxification corpora", "detox-chain"};
  app.set_version_flag("--version", std::string(detox_version()));
  app.require_subcommand(1);

  Flags f;
  auto* ingest = app.add_subcommand("ingest", "Normalize an RTP or JigSaw source into prompts");
  auto* build = app.add_subcommand("build-chains", "Construct chains with the span model path");
  auto* build_api = app.add_subcommand("build-chains-api", "Construct chains with designed prompts");
  auto* train = app.add_subcommand("train-span", "Train a span toxicity model");
  auto* detect = app.add_subcommand("detect", "Score and detect toxic spans");
  auto* evaluate = app.add_subcommand("evaluate", "Compute generation metrics");
  auto* grade = app.add_subcommand("grade-chains", "Grade chain-formatted model outputs");
  auto* parse = app.add_subcommand("parse-chain", "Parse one chain text");
  for (auto* c : {ingest, build, build_api, train, detect, evaluate, grade, parse}) add_common(*c, f);

  ingest->add_option("--source", f.source, "Source file")->required();
  ingest->add_option("--format", f.format, "Source format")
      ->check(CLI::IsMember({"rtp-jsonl", "jigsaw-csv"}));
  train->add_option("--epochs", f.epochs, "Training epochs");
  train->add_option("--augmentation-rate", f.augmentation_rate, "Span insertion probability");
  detect->add_option("--text", f.text, "Text to score (default: every prompt in --input)");
  evaluate->add_option("--gold", f.gold, "Prompts file with gold toxicity");
  evaluate->add_option("--edit-mode", f.edit_mode, "Edit distance unit")
      ->check(CLI::IsMember({"token", "char"}));
  evaluate->add_flag("--table", f.table, "Print a table instead of JSON");
  grade->add_option("--gold", f.gold, "Gold chain corpus")->required();
  auto* text_opt = parse->add_option("--text", f.text, "Chain text");
  parse->add_option("--file", f.text_file, "File holding the chain text")->excludes(text_opt);
  parse->add_flag("--strict", f.strict, "Strict parsing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", 2, e.what());
    return 2;
  }

  std::string command;
  for (auto* c : app.get_subcommands()) command = c->get_name();

  std::string overrides, args;
  try {
    overrides = build_overrides(f).dump();
    args = build_args(f).dump();
  } catch (const std::exception& e) {
    print_error("io_error", DETOX_E_IO, e.what());
    return 1;
  }

  std::signal(SIGINT, on_sigint);
  char* out = nullptr;
  const detox_status st = detox_run_command(command.c_str(), f.config.empty() ? nullptr : f.config.c_str(),
                                            overrides.c_str(), args.c_str(), &out);
  if (out) {
    if (command == "evaluate" && f.table) {
      std::cout << Json::parse(out).value("table", std::string()) << std::flush;
    } else {
      std::cout << out << std::endl;
    }
    detox_string_free(out);
  }
  if (st != DETOX_OK) {
    std::cerr << detox_last_error_json() << std::endl;
    return st == DETOX_E_CANCELLED ? 130 : 1;
  }
  return 0;
}
