// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#pragma once

// Batch commands behind the `tprm` tool. Each returns an exit code (0 ok,
// 1 validation, 2 runtime or provider failure), writes data only to files and
// logs to the given stream. Every command writes `<out>.manifest.json`, which
// embeds the effective config and can be passed back as --config to replay
// the run.

#include <atomic>
#include <csignal>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tprm/bench/bench.hpp"
#include "tprm/cli/config.hpp"
#include "tprm/core/error.hpp"
#include "tprm/core/parallel.hpp"
#include "tprm/core/rng.hpp"
#include "tprm/core/text.hpp"
#include "tprm/implicit_prm/credit_report.hpp"
#include "tprm/pairgen/pair_io.hpp"
#include "tprm/pairgen/pairgen.hpp"
#include "tprm/remote/fixture_server.hpp"
#include "tprm/tta/decoder.hpp"

namespace tprm::cli {

inline constexpr const char* kToolVersion = "tprm 0.1.0";

struct Options {
  std::string config;
  std::string out;
  std::string in;
  std::string bench;
  std::size_t jobs = 0;  // 0: logical CPU count
  std::optional<std::uint64_t> seed;
  std::optional<double> w;
  std::optional<std::size_t> k;
  std::optional<std::vector<double>> w_grid;
  std::string host = "127.0.0.1";
  int port = 8080;
};

/// Exit code for a toolkit error: input/config problems are validation
/// failures, everything raised while running models is a runtime failure.
inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kUnknownToken:
    case ErrorCode::kTokenizerMismatch:
    case ErrorCode::kParseError:
    case ErrorCode::kSchemaError:
    case ErrorCode::kConfigError:
    case ErrorCode::kIoError:
      return 1;
    default:
      return 2;
  }
}

/// Loads a config or a manifest from an earlier run. Flag overrides are
/// written into the document before parsing.
inline RunConfig load_run_config(const Options& opts) {
  if (opts.config.empty()) throw Error(ErrorCode::kConfigError, "--config is required");
  json doc = load_config_document(opts.config);
  std::string base = opts.config;
  if (doc.is_object() && doc.contains("effective_config")) {
    base = doc.value("config_path", opts.config);
    doc = json(doc.at("effective_config"));
  }
  if (!doc.is_object()) throw Error(ErrorCode::kConfigError, opts.config + ": config must be a JSON object");
  if (opts.seed) doc["seed"] = *opts.seed;
  if (opts.w) doc["decode"]["w"] = *opts.w;
  if (opts.k) doc["decode"]["k"] = *opts.k;
  if (opts.w_grid) doc["sweep"]["w_grid"] = *opts.w_grid;
  return parse_config(std::move(doc), std::filesystem::absolute(base).lexically_normal().string());
}

struct InputRecord {
  std::size_t line = 0;
  std::string source;
  std::optional<std::string> hypothesis;
  std::string lang_pair;
};

/// JSONL with one object per line: {"source", "lang_pair"?, "hypothesis"?}.
/// Blank lines are skipped; line numbers are 1-based.
inline std::vector<InputRecord> read_inputs(std::istream& in, const std::string& default_lang_pair,
                                            bool need_hypothesis) {
  std::vector<InputRecord> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text::trim(text).empty()) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParseError, line, "", e.what());
    }
    if (!j.is_object()) throw Error(ErrorCode::kSchemaError, line, "", "record must be an object");
    auto str = [&](const char* key, bool required) -> std::optional<std::string> {
      if (!j.contains(key)) {
        if (required) throw Error(ErrorCode::kSchemaError, line, key, "missing");
        return std::nullopt;
      }
      if (!j.at(key).is_string()) throw Error(ErrorCode::kSchemaError, line, key, "must be a string");
      return j.at(key).get<std::string>();
    };
    InputRecord r;
    r.line = line;
    r.source = *str("source", true);
    if (r.source.empty()) throw Error(ErrorCode::kSchemaError, line, "source", "must be non-empty");
    r.hypothesis = str("hypothesis", need_hypothesis);
    r.lang_pair = str("lang_pair", false).value_or(default_lang_pair);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<InputRecord> read_inputs_file(const std::string& path, const std::string& default_lang_pair,
                                                 bool need_hypothesis) {
  if (path.empty()) throw Error(ErrorCode::kConfigError, "--in is required");
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open input '" + path + "'");
  try {
    return read_inputs(in, default_lang_pair, need_hypothesis);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

inline void write_manifest(const Options& opts, const RunConfig& cfg, const std::string& command,
                           const std::vector<std::string>& outputs, nlohmann::ordered_json counts) {
  nlohmann::ordered_json m;
  m["tool"] = kToolVersion;
  m["command"] = command;
  m["config_path"] = cfg.path;
  m["config_hash"] = cfg.hash();
  m["seed"] = cfg.seed;
  if (!opts.in.empty()) m["input"] = opts.in;
  if (!opts.bench.empty()) m["bench"] = opts.bench;
  m["outputs"] = outputs;
  m["counts"] = std::move(counts);
  m["effective_config"] = cfg.document;
  text::write_file(opts.out + ".manifest.json", m.dump(2) + "\n");
}

inline void require_out(const Options& opts) {
  if (opts.out.empty()) throw Error(ErrorCode::kConfigError, "--out is required");
}

inline int cmd_gen_pairs(const Options& opts, std::ostream& log) {
  require_out(opts);
  const RunConfig cfg = load_run_config(opts);
  const auto providers = make_providers(cfg, {"generator", "scorer"}, "gen-pairs");
  const auto& lm = providers.model("generator");

  std::vector<InputRecord> sources;
  if (cfg.sources_path) {
    std::ifstream in(*cfg.sources_path);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open sources '" + *cfg.sources_path + "'");
    sources = read_inputs(in, cfg.lang_pair, false);
  }
  for (const auto& s : cfg.inline_sources) sources.push_back({0, s, std::nullopt, cfg.lang_pair});
  if (sources.empty() && !cfg.sources_path) {
    throw Error(ErrorCode::kConfigError, "io.sources_path or io.sources is required for 'gen-pairs'");
  }

  std::vector<pairgen::TreeResult> trees(sources.size());
  parallel_for(sources.size(), opts.jobs, [&](std::size_t i) {
    pairgen::PairgenConfig pc = cfg.pairgen;
    pc.seed = derive_seed(cfg.seed, {i});
    std::string prefix = std::to_string(i);
    if (prefix.size() < 5) prefix.insert(0, 5 - prefix.size(), '0');
    trees[i] = pairgen::build_tree(sources[i].source, pc, lm, *providers.scorer,
                                   {sources[i].lang_pair, "s" + prefix});
  });

  std::string jsonl;
  std::size_t emitted = 0;
  std::size_t cycles = 0;
  std::map<std::string, std::size_t> rejected{{"gap_too_small", 0}, {"gap_too_large", 0}, {"inverted", 0}};
  for (const auto& t : trees) {
    for (const auto& p : t.pairs) jsonl += pairgen::to_jsonl_line(pairgen::to_record(p, lm)) + "\n";
    emitted += t.pairs.size();
    cycles += t.cycles;
    for (const auto& [reason, n] : t.rejection_histogram()) rejected[reason] += n;
  }
  text::write_file(opts.out, jsonl);

  std::size_t rejected_total = 0;
  for (const auto& [reason, n] : rejected) rejected_total += n;
  write_manifest(opts, cfg, "gen-pairs", {opts.out},
                 {{"sources", sources.size()},
                  {"candidates", cycles},
                  {"emitted", emitted},
                  {"rejected", rejected_total},
                  {"rejected_by_reason", rejected}});
  log << "gen-pairs: " << sources.size() << " sources, " << cycles << " candidates, " << emitted << " emitted, "
      << rejected_total << " rejected\n";
  return 0;
}

inline int cmd_eval(const Options& opts, std::ostream& log) {
  require_out(opts);
  const RunConfig cfg = load_run_config(opts);
  if (opts.bench.empty()) throw Error(ErrorCode::kConfigError, "--bench is required");
  std::vector<bench::BenchItem> items;
  try {
    items = bench::load_bench(opts.bench);
  } catch (const Error& e) {
    throw Error(e.code(), opts.bench + ": " + e.what());
  }
  const auto providers = make_providers(cfg, {"prm_policy", "prm_reference"}, "eval");
  const auto report =
      bench::accuracy(items, providers.model("prm_policy"), providers.model("prm_reference"), cfg.reward, opts.jobs);

  text::write_file(opts.out, bench::to_json(report).dump(2) + "\n");
  text::write_file(opts.out + ".tsv", bench::to_tsv(report));
  text::write_file(opts.out + ".md", bench::to_markdown(report, providers.model("prm_policy").tag()));
  write_manifest(opts, cfg, "eval", {opts.out, opts.out + ".tsv", opts.out + ".md"},
                 bench::to_json(report.counts));
  for (const auto& e : report.errors) log << "eval: item error: " << e << "\n";
  log << "eval: " << report.counts.items << " items, accuracy " << text::format_fixed(report.accuracy(), 4)
      << ", ties " << report.counts.ties << ", errors " << report.counts.errors << "\n";
  return 0;
}

/// Record-level failures (e.g. an empty hypothesis) become error lines in the
/// output and the run continues; the exit code is 1 if any record failed.
/// Provider failures abort the run.
inline int cmd_score(const Options& opts, std::ostream& log) {
  require_out(opts);
  const RunConfig cfg = load_run_config(opts);
  const auto inputs = read_inputs_file(opts.in, cfg.lang_pair, true);
  std::vector<std::string> slots{"prm_policy", "prm_reference"};
  if (cfg.has("scorer")) slots.push_back("scorer");
  const auto providers = make_providers(cfg, slots, "score");
  const auto& policy = providers.model("prm_policy");
  const auto& reference = providers.model("prm_reference");

  std::vector<std::optional<prm::CreditReport>> reports(inputs.size());
  std::vector<std::string> failures(inputs.size());
  parallel_for(inputs.size(), opts.jobs, [&](std::size_t i) {
    const auto& r = inputs[i];
    try {
      if (r.hypothesis->empty()) throw Error(ErrorCode::kInvalidArgument, "hypothesis is empty");
      TokenSequence seq = policy.encode_source(r.source);
      seq.continuation = policy.tokenize(*r.hypothesis);
      seq.continuation.push_back(policy.eos());
      seq.terminated = true;
      reports[i] = prm::credit_report(seq, policy, reference, cfg.reward, providers.scorer.get(), r.lang_pair);
    } catch (const Error& e) {
      if (exit_code_for(e.code()) != 1) throw;
      failures[i] = e.what();
    }
  });

  std::string jsonl;
  std::string tsv;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (reports[i]) {
      auto j = prm::to_json(*reports[i]);
      j["line"] = inputs[i].line;
      jsonl += j.dump() + "\n";
      tsv += prm::to_tsv(*reports[i], "Line " + std::to_string(inputs[i].line));
    } else {
      ++failed;
      nlohmann::ordered_json j{{"line", inputs[i].line}, {"error", failures[i]}};
      jsonl += j.dump() + "\n";
      log << "score: line " << inputs[i].line << ": " << failures[i] << "\n";
    }
  }
  text::write_file(opts.out, jsonl);
  text::write_file(opts.out + ".tsv", tsv);
  write_manifest(opts, cfg, "score", {opts.out, opts.out + ".tsv"},
                 {{"records", inputs.size()}, {"scored", inputs.size() - failed}, {"failed", failed}});
  log << "score: " << inputs.size() << " records, " << failed << " failed\n";
  return failed == 0 ? 0 : 1;
}

inline int cmd_decode(const Options& opts, std::ostream& log) {
  require_out(opts);
  const RunConfig cfg = load_run_config(opts);
  const auto inputs = read_inputs_file(opts.in, cfg.lang_pair, false);
  const bool guided = cfg.decode.mode == tta::DecodeMode::kRewardGuided;
  std::vector<std::string> slots{"generator"};
  if (guided) slots.insert(slots.end(), {"prm_policy", "prm_reference"});
  const auto providers = make_providers(cfg, slots, "decode");
  const auto& gen = providers.model("generator");
  // Greedy decoding never queries the PRM; the generator stands in for it.
  const tta::RewardModel prm{guided ? providers.model("prm_policy") : gen,
                             guided ? providers.model("prm_reference") : gen};

  std::vector<std::string> hyps(inputs.size());
  parallel_for(inputs.size(), opts.jobs, [&](std::size_t i) {
    const auto seq = tta::decode(inputs[i].source, gen, prm, cfg.decode);
    hyps[i] = gen.detokenize(seq.continuation);
    require(hyps[i].find('\n') == std::string::npos, "hypothesis contains a newline");
  });
  std::string out;
  for (const auto& h : hyps) out += h + "\n";
  text::write_file(opts.out, out);
  write_manifest(opts, cfg, "decode", {opts.out}, {{"sources", inputs.size()}});
  log << "decode: " << inputs.size() << " hypotheses\n";
  return 0;
}

inline int cmd_sweep(const Options& opts, std::ostream& log) {
  require_out(opts);
  const RunConfig cfg = load_run_config(opts);
  const auto inputs = read_inputs_file(opts.in, cfg.lang_pair, false);
  const auto providers = make_providers(cfg, {"generator", "prm_policy", "prm_reference", "scorer"}, "sweep");
  std::vector<std::string> sources;
  for (const auto& r : inputs) sources.push_back(r.source);
  const tta::RewardModel prm{providers.model("prm_policy"), providers.model("prm_reference")};
  const auto report = tta::sweep_w(sources, providers.model("generator"), prm, cfg.decode, cfg.w_grid,
                                   *providers.scorer, cfg.lang_pair, cfg.sweep_label, opts.jobs);
  text::write_file(opts.out, tta::to_json(report).dump(2) + "\n");
  text::write_file(opts.out + ".tsv", tta::to_tsv(report));
  write_manifest(opts, cfg, "sweep", {opts.out, opts.out + ".tsv"},
                 {{"sources", sources.size()}, {"w_values", report.w_values.size()}});
  log << "sweep: " << sources.size() << " sources x " << report.w_values.size() << " w values\n";
  return 0;
}

namespace detail {
inline std::atomic<remote::FixtureServer*> serving{nullptr};
inline void on_signal(int) {
  if (auto* s = serving.load()) s->stop();
}
}  // namespace detail

/// Serves every toy provider in the config over the wire protocol. Models are
/// registered under their tags, first slot wins (generator before the PRM
/// pair); a toy scorer is registered as "scorer".
inline int cmd_serve(const Options& opts, std::ostream& log) {
  const RunConfig cfg = load_run_config(opts);
  remote::FixtureServer server;
  for (const char* slot : kSlots) {
    auto it = cfg.providers.find(slot);
    if (it == cfg.providers.end() || !it->second.toy_path) continue;
    const auto& path = *it->second.toy_path;
    if (std::string_view(slot) == "scorer") {
      server.add_scorer("scorer", toy::load_scorer_file(path));
      continue;
    }
    auto lm = toy::load_language_model_file(path);
    if (server.has_model(lm->tag())) {
      log << "serve: " << slot << " shares tag '" << lm->tag() << "' with an earlier slot; not served\n";
      continue;
    }
    log << "serve: " << slot << " as '" << lm->tag() << "'\n";
    server.add_model(std::move(lm));
  }
  detail::serving = &server;
  std::signal(SIGINT, detail::on_signal);
  std::signal(SIGTERM, detail::on_signal);
  log << "serve: listening on " << opts.host << ":" << opts.port << "\n";
  server.run(opts.host, opts.port);
  detail::serving = nullptr;
  return 0;
}

/// Runs a command and maps failures to exit codes.
template <typename Command>
int guarded(const char* name, Command&& command, const Options& opts, std::ostream& log) {
  try {
    return command(opts, log);
  } catch (const Error& e) {
    log << name << ": error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    log << name << ": error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace tprm::cli
