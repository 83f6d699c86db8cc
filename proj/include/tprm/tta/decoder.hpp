// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#pragma once

/**
 * Reward-guided (test-time alignment) decoding.
 *
 * At each step the generator's top-k tokens are rescored as
 *
 *   score(a) = LM(a | s) + w * softmax_k(r(s, a))
 *
 * where LM is the generator's probability, r the implicit per-token reward of
 * a PRM (policy, reference) pair, and the softmax runs over the k-token
 * window only. w = 0 reduces to greedy decoding.
 *
 * When the generator and the PRM tokenize differently, a candidate's reward
 * is q(PRM tokens of prefix text + candidate) - q(PRM tokens of prefix text),
 * summed over the tokens where the two PRM tokenizations differ.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tprm/core/error.hpp"
#include "tprm/core/parallel.hpp"
#include "tprm/core/text.hpp"
#include "tprm/implicit_prm/rewards.hpp"
#include "tprm/providers/language_model.hpp"
#include "tprm/providers/scorer.hpp"

namespace tprm::tta {

enum class DecodeMode { kGreedy, kRewardGuided };

struct DecodeConfig {
  double w = 0.0;
  std::size_t k = 10;
  std::size_t max_len = kDefaultMaxLen;
  DecodeMode mode = DecodeMode::kRewardGuided;
  double beta = 0.1;
  bool log_space = false;  // extension: log LM(a|s) + w * P(r); off by default
  bool force_bridge = false;  // use the cross-tokenizer path even for a shared tokenizer

  void validate() const {
    require(w >= 0.0 && std::isfinite(w), "w must be >= 0");
    require(k >= 1, "k must be >= 1");
    require(max_len >= 1, "max_len must be >= 1");
    require(beta > 0.0, "beta must be positive");
  }
};

/// The PRM side of the decoder: implicit rewards from a policy/reference pair.
struct RewardModel {
  const LanguageModel& policy;
  const LanguageModel& reference;
};

struct ScoredCandidate {
  TokenId token{};
  double lm_prob = 0.0;
  double reward = 0.0;
  double normalized_reward = 0.0;
  double score = 0.0;
};

namespace detail {

inline double step_reward(const TokenSequence& seq, TokenId token, const RewardModel& prm, double beta) {
  return beta * (prm.policy.token_logprob(seq, token) - prm.reference.token_logprob(seq, token));
}

/// PRM-side sequence for the generator state `gen` (optionally extended by `token`).
inline TokenSequence bridge_sequence(const LanguageModel& generator, const TokenSequence& gen, const TokenSequence& prm_prompt,
                                     const LanguageModel& prm_lm, bool terminated) {
  TokenSequence seq = prm_prompt;
  const auto text = generator.detokenize(gen.continuation);
  if (!text.empty()) seq.continuation = prm_lm.tokenize(text);
  if (terminated) {
    seq.continuation.push_back(prm_lm.eos());
    seq.terminated = true;
  }
  return seq;
}

/// q(extended) - q(prefix), evaluated over the tails after the longest common
/// token prefix so that identical leading terms cancel exactly.
inline double bridged_reward(const LanguageModel& generator, const TokenSequence& gen_prefix, TokenId token,
                             const TokenSequence& prm_prompt, const RewardModel& prm, double beta) {
  const TokenSequence gen_ext = gen_prefix.extended(token, generator.eos());
  const auto before = bridge_sequence(generator, gen_prefix, prm_prompt, prm.policy, false);
  const auto after = bridge_sequence(generator, gen_ext, prm_prompt, prm.policy, gen_ext.terminated);

  std::size_t common = 0;
  while (common < before.continuation.size() && common < after.continuation.size() &&
         before.continuation[common] == after.continuation[common]) {
    ++common;
  }
  auto tail_sum = [&](const TokenSequence& s) {
    if (s.continuation.size() == common) return 0.0;
    const auto d = prm::logratio_terms(s, prm.policy, prm.reference);
    double total = 0.0;
    for (std::size_t i = common; i < d.size(); ++i) total += beta * d[i];
    return total;
  };
  return tail_sum(after) - tail_sum(before);
}

}  // namespace detail

/// Scores the generator's top-k window at `prefix`; sorted by score
/// descending, then higher lm_prob, then lower token id. `prm_prompt` is the
/// source under the PRM tokenizer (only used when tokenizers differ).
inline std::vector<ScoredCandidate> score_candidates(const TokenSequence& prefix, const LanguageModel& generator,
                                                     const RewardModel& prm, const DecodeConfig& cfg,
                                                     const TokenSequence* prm_prompt = nullptr) {
  cfg.validate();
  prm::check_same_tokenizer(prm.policy, prm.reference);
  require(!prefix.terminated, "cannot extend a terminated prefix");
  const auto window = generator.next_token_logits(prefix, TopK::of(cfg.k));
  if (window.candidates.empty()) throw Error(ErrorCode::kDegenerateDistribution, "generator has no candidates");

  const bool shared = generator.tag() == prm.policy.tag() && !cfg.force_bridge;
  TokenSequence bridge_prompt;
  if (!shared) {
    if (prm_prompt != nullptr) {
      bridge_prompt = *prm_prompt;
    } else {
      bridge_prompt = prm.policy.encode_source(generator.detokenize(prefix.prompt));
    }
  }

  std::vector<ScoredCandidate> out(window.candidates.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& c = window.candidates[i];
    out[i].token = c.token;
    out[i].lm_prob = std::exp(c.logprob);
    out[i].reward = shared ? detail::step_reward(prefix, c.token, prm, cfg.beta)
                           : detail::bridged_reward(generator, prefix, c.token, bridge_prompt, prm, cfg.beta);
  }

  // Softmax over the window (temperature 1), max-shifted.
  double top = out.front().reward;
  for (const auto& c : out) top = std::max(top, c.reward);
  double total = 0.0;
  for (auto& c : out) {
    c.normalized_reward = std::exp(c.reward - top);
    total += c.normalized_reward;
  }
  for (auto& c : out) {
    c.normalized_reward /= total;
    c.score = (cfg.log_space ? std::log(c.lm_prob) : c.lm_prob) + cfg.w * c.normalized_reward;
  }

  std::stable_sort(out.begin(), out.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.lm_prob != b.lm_prob) return a.lm_prob > b.lm_prob;
    return index_of(a.token) < index_of(b.token);
  });
  return out;
}

/// Appends the best-scoring candidate until EOS wins or max_len tokens exist.
/// Greedy mode takes the generator's top logit and never queries the PRM.
inline TokenSequence decode(std::string_view source_text, const LanguageModel& generator, const RewardModel& prm,
                            const DecodeConfig& cfg) {
  cfg.validate();
  TokenSequence seq = generator.encode_source(source_text);
  TokenSequence prm_prompt;
  const bool shared = generator.tag() == prm.policy.tag() && !cfg.force_bridge;
  if (cfg.mode == DecodeMode::kRewardGuided && !shared) prm_prompt = prm.policy.encode_source(source_text);

  while (!seq.terminated && seq.continuation.size() < cfg.max_len) {
    TokenId next{};
    if (cfg.mode == DecodeMode::kGreedy) {
      const auto top = generator.next_token_logits(seq, TopK::of(1));
      if (top.candidates.empty()) throw Error(ErrorCode::kDegenerateDistribution, "generator has no candidates");
      next = top.candidates.front().token;
    } else {
      next = score_candidates(seq, generator, prm, cfg, shared ? nullptr : &prm_prompt).front().token;
    }
    seq.continuation.push_back(next);
    seq.terminated = (next == generator.eos());
  }
  return seq;
}

struct SweepReport {
  std::string label;
  std::vector<double> w_values;
  std::vector<double> mean_quality;              // per w
  double greedy_quality = 0.0;                   // baseline row
  std::vector<std::vector<double>> per_source;   // [w][source]
  std::vector<std::vector<std::string>> hypotheses;  // [w][source]
};

/// Decodes every source under every w and records the mean scorer quality
/// per w, plus the greedy baseline. Empty hypotheses score 0.
inline SweepReport sweep_w(const std::vector<std::string>& sources, const LanguageModel& generator, const RewardModel& prm,
                           const DecodeConfig& base, const std::vector<double>& w_values, const QualityScorer& scorer,
                           std::string_view lang_pair = {}, std::string label = "PRM-guided", std::size_t jobs = 1) {
  require(!w_values.empty(), "need at least one w value");
  base.validate();
  SweepReport report;
  report.label = std::move(label);
  report.w_values = w_values;

  auto run = [&](const DecodeConfig& cfg, std::vector<double>& scores, std::vector<std::string>& hyps) {
    scores.assign(sources.size(), 0.0);
    hyps.assign(sources.size(), {});
    parallel_for(sources.size(), jobs, [&](std::size_t i) {
      const auto out = decode(sources[i], generator, prm, cfg);
      hyps[i] = generator.detokenize(out.continuation);
      scores[i] = hyps[i].empty() ? 0.0 : scorer.score(sources[i], hyps[i], lang_pair).value();
    });
    double total = 0.0;
    for (double s : scores) total += s;
    return sources.empty() ? 0.0 : total / static_cast<double>(sources.size());
  };

  DecodeConfig greedy = base;
  greedy.mode = DecodeMode::kGreedy;
  std::vector<double> greedy_scores;
  std::vector<std::string> greedy_hyps;
  report.greedy_quality = run(greedy, greedy_scores, greedy_hyps);

  report.per_source.resize(w_values.size());
  report.hypotheses.resize(w_values.size());
  for (std::size_t j = 0; j < w_values.size(); ++j) {
    DecodeConfig cfg = base;
    cfg.mode = DecodeMode::kRewardGuided;
    cfg.w = w_values[j];
    report.mean_quality.push_back(run(cfg, report.per_source[j], report.hypotheses[j]));
  }
  return report;
}

inline std::string to_tsv(const SweepReport& r) {
  std::string head = "config\tgreedy";
  std::string row = r.label + "\t" + text::format_fixed(r.greedy_quality, 4);
  for (std::size_t j = 0; j < r.w_values.size(); ++j) {
    head += "\tw=" + text::format_double(r.w_values[j]);
    row += "\t" + text::format_fixed(r.mean_quality[j], 4);
  }
  return head + "\n" + row + "\n";
}

inline nlohmann::ordered_json to_json(const SweepReport& r) {
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (std::size_t j = 0; j < r.w_values.size(); ++j) {
    cells.push_back({{"w", r.w_values[j]}, {"mean_quality", r.mean_quality[j]}, {"per_source", r.per_source[j]}});
  }
  nlohmann::ordered_json j;
  j["rows"] = nlohmann::ordered_json::array(
      {{{"config", r.label}, {"greedy_quality", r.greedy_quality}, {"cells", std::move(cells)}}});
  return j;
}

}  // namespace tprm::tta
