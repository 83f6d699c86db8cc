// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#pragma once

// Argument parsing for the `tprm` tool. Flags take precedence over the
// config file, which takes precedence over built-in defaults.

#include <iostream>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tprm/cli/commands.hpp"

namespace tprm::cli {

inline int main(int argc, char** argv, std::ostream& log = std::cerr) {
  CLI::App app{"Token-level process reward toolkit"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  Options opts;
  std::uint64_t seed = 0;
  double w = 0.0;
  std::size_t k = 0;
  std::vector<double> w_grid;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config, "Run config or manifest (JSON)")->required();
    sub->add_option("--jobs", opts.jobs, "Worker threads (default: logical CPUs)");
  };
  auto* gen = app.add_subcommand("gen-pairs", "Generate token-level preference pairs");
  common(gen);
  gen->add_option("--out", opts.out, "Output JSONL")->required();
  auto* seed_opt = gen->add_option("--seed", seed, "Run seed (overrides config)");

  auto* eval = app.add_subcommand("eval", "Pairwise accuracy on a benchmark");
  common(eval);
  eval->add_option("--bench", opts.bench, "Benchmark JSONL")->required();
  eval->add_option("--out", opts.out, "Report JSON")->required();

  auto* score = app.add_subcommand("score", "Per-token credit reports");
  common(score);
  score->add_option("--in", opts.in, "Input JSONL with source and hypothesis")->required();
  score->add_option("--out", opts.out, "Output JSONL")->required();

  auto* decode = app.add_subcommand("decode", "Reward-guided decoding");
  common(decode);
  decode->add_option("--in", opts.in, "Input JSONL with source")->required();
  decode->add_option("--out", opts.out, "One hypothesis per line")->required();
  auto* w_opt = decode->add_option("--w", w, "Reward weight (overrides config)");
  auto* k_opt = decode->add_option("--k", k, "Candidate window (overrides config)");

  auto* sweep = app.add_subcommand("sweep", "Quality over a grid of reward weights");
  common(sweep);
  sweep->add_option("--in", opts.in, "Input JSONL with source")->required();
  sweep->add_option("--out", opts.out, "Report JSON")->required();
  auto* grid_opt = sweep->add_option("--w-grid", w_grid, "Comma-separated w values")->delimiter(',');

  auto* serve = app.add_subcommand("serve", "Serve the config's toy providers over the wire protocol");
  serve->add_option("--config", opts.config, "Run config (JSON)")->required();
  serve->add_option("--host", opts.host, "Bind address");
  serve->add_option("--port", opts.port, "Port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, log, log);
    return code == 0 ? 0 : 1;
  }
  if (seed_opt->count() > 0) opts.seed = seed;
  if (w_opt->count() > 0) opts.w = w;
  if (k_opt->count() > 0) opts.k = k;
  if (grid_opt->count() > 0) opts.w_grid = w_grid;

  if (gen->parsed()) return guarded("gen-pairs", cmd_gen_pairs, opts, log);
  if (eval->parsed()) return guarded("eval", cmd_eval, opts, log);
  if (score->parsed()) return guarded("score", cmd_score, opts, log);
  if (decode->parsed()) return guarded("decode", cmd_decode, opts, log);
  if (sweep->parsed()) return guarded("sweep", cmd_sweep, opts, log);
  return guarded("serve", cmd_serve, opts, log);
}

}  // namespace tprm::cli
