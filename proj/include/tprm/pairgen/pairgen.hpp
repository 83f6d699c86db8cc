// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#pragma once

/**
 * Token-level preference pairs by approximate Monte Carlo tree search.
 *
 * One cycle per committed token:
 *   1. select   - the prompt plus every committed token is the prefix;
 *   2. expand   - the two highest-logit next tokens become child nodes;
 *   3. simulate - each child is valued by the mean quality of n sampled
 *                 rollouts (or, for enumerable toy worlds, the exact
 *                 expectation over every continuation);
 *   4. backprop - the child with the higher value is committed.
 * Each cycle proposes one pair (best rollout of the winner vs best rollout of
 * the loser); it is kept only if the score gap lies in [gap_min, gap_max].
 * Cycles repeat until EOS is committed or the prefix reaches max_len.
 *
 * Full PUCT selection is deliberately absent: the tree is a single committed
 * path with one branching per step.
 */

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tprm/core/error.hpp"
#include "tprm/core/parallel.hpp"
#include "tprm/core/rng.hpp"
#include "tprm/core/types.hpp"
#include "tprm/providers/language_model.hpp"
#include "tprm/providers/scorer.hpp"

namespace tprm::pairgen {

enum class SimulationMode { kSampled, kExhaustive };

struct PairgenConfig {
  std::size_t n_rollouts = 3;
  double temperature = 0.95;
  double gap_min = 0.04;
  double gap_max = 0.4;
  std::size_t max_len = kDefaultMaxLen;
  SimulationMode simulation_mode = SimulationMode::kSampled;
  std::uint64_t seed = 0;
  std::size_t enumeration_cap = 100000;  // leaves, exhaustive mode only
  std::size_t rollout_jobs = 1;          // concurrent rollouts inside simulate

  void validate() const {
    require(n_rollouts > 0, "n_rollouts must be positive");
    require(temperature > 0.0, "temperature must be positive");
    require(gap_min >= 0.0 && gap_min < gap_max && gap_max <= 1.0, "need 0 <= gap_min < gap_max <= 1");
    require(max_len > 0, "max_len must be positive");
    require(enumeration_cap > 0, "enumeration_cap must be positive");
  }
};

struct ScoredRollout {
  TokenSequence sequence;
  QualityScore score;
};

/// An expanded child: `token` appended to the shared context `prefix`.
struct SearchNode {
  TokenId token{};
  std::size_t slot = 0;  // expansion rank, 0 = highest logit
  TokenSequence prefix;
  std::vector<ScoredRollout> rollouts;
  std::optional<double> value;  // V(node)

  TokenSequence child(TokenId eos) const { return prefix.extended(token, eos); }
};

enum class Level { kToken, kSequence };

inline std::string_view to_string(Level level) { return level == Level::kToken ? "token" : "sequence"; }

struct PreferencePair {
  std::string pair_id;
  std::string lang_pair;
  Level level = Level::kToken;
  std::string source_text;
  TokenSequence prefix;
  TokenId chosen_token{};
  TokenId rejected_token{};
  TokenSequence chosen_rollout;
  TokenSequence rejected_rollout;
  QualityScore chosen_score;
  QualityScore rejected_score;
  std::uint64_t seed = 0;
};

enum class RejectReason { kGapTooSmall, kGapTooLarge, kInverted };

inline std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::kGapTooSmall: return "gap_too_small";
    case RejectReason::kGapTooLarge: return "gap_too_large";
    case RejectReason::kInverted: return "inverted";
  }
  return "unknown";
}

struct Rejection {
  RejectReason reason;
  std::size_t prefix_length = 0;
  double winner_score = 0.0;
  double loser_score = 0.0;
};

using EmitResult = std::variant<PreferencePair, Rejection>;

/// Hypothesis quality; an empty hypothesis (immediate EOS) scores 0 without
/// consulting the scorer.
inline QualityScore score_sequence(const LanguageModel& lm, const QualityScorer& scorer, const TokenSequence& seq,
                                   std::string_view source_text, std::string_view lang_pair) {
  const auto hyp = lm.detokenize(seq.continuation);
  if (hyp.empty()) return QualityScore(0.0);
  return scorer.score(source_text, hyp, lang_pair);
}

inline std::uint64_t rollout_seed(std::uint64_t base, std::size_t prefix_length, std::size_t slot,
                                  std::size_t rollout_index) {
  return derive_seed(base, {prefix_length, slot, rollout_index});
}

/// Two children for the two highest-logit tokens (ties: lower id first).
inline std::pair<SearchNode, SearchNode> expand(const TokenSequence& prefix, const LanguageModel& lm) {
  require(!prefix.terminated, "cannot expand a terminated prefix");
  const auto top = lm.next_token_logits(prefix, TopK::of(2));
  if (top.candidates.size() < 2) {
    throw Error(ErrorCode::kDegenerateDistribution, "fewer than two tokens with nonzero probability");
  }
  SearchNode a{top.candidates[0].token, 0, prefix, {}, std::nullopt};
  SearchNode b{top.candidates[1].token, 1, prefix, {}, std::nullopt};
  return {std::move(a), std::move(b)};
}

namespace detail {

struct Leaf {
  TokenSequence sequence;
  double probability;
};

inline void enumerate_leaves(const LanguageModel& lm, const TokenSequence& seq, double probability,
                             const PairgenConfig& cfg, std::vector<Leaf>& out) {
  if (seq.terminated || seq.continuation.size() >= cfg.max_len) {
    if (out.size() >= cfg.enumeration_cap) {
      throw Error(ErrorCode::kExhaustiveTooLarge,
                  "continuation space exceeds enumeration cap " + std::to_string(cfg.enumeration_cap));
    }
    out.push_back({seq, probability});
    return;
  }
  const auto r = lm.next_token_logits(seq, TopK::all());
  const auto probs = tempered_probs(r, cfg.temperature);
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    enumerate_leaves(lm, seq.extended(r.candidates[i].token, lm.eos()), probability * probs[i], cfg, out);
  }
}

}  // namespace detail

/// Values a node. Sampled: n seeded rollouts, V = mean score. Exhaustive: V =
/// exact expected score under the tempered rollout distribution, rollouts =
/// the best and worst continuations.
inline SearchNode simulate(SearchNode node, const PairgenConfig& cfg, const LanguageModel& lm,
                           const QualityScorer& scorer, std::string_view source_text,
                           std::string_view lang_pair = {}) {
  require(node.rollouts.empty(), "node already simulated");
  cfg.validate();
  const TokenSequence start = node.child(lm.eos());

  if (cfg.simulation_mode == SimulationMode::kSampled) {
    std::vector<std::optional<ScoredRollout>> slots(cfg.n_rollouts);
    parallel_for(cfg.n_rollouts, cfg.rollout_jobs, [&](std::size_t i) {
      TokenSequence r = start.terminated
                            ? start
                            : lm.sample_rollout(start, cfg.temperature, cfg.max_len,
                                                rollout_seed(cfg.seed, node.prefix.continuation.size(), node.slot, i));
      auto score = score_sequence(lm, scorer, r, source_text, lang_pair);
      slots[i] = ScoredRollout{std::move(r), score};
    });
    double total = 0.0;
    for (auto& s : slots) {
      total += s->score.value();
      node.rollouts.push_back(std::move(*s));
    }
    node.value = total / static_cast<double>(cfg.n_rollouts);
    return node;
  }

  std::vector<detail::Leaf> leaves;
  detail::enumerate_leaves(lm, start, 1.0, cfg, leaves);
  double expected = 0.0;
  std::size_t best = 0;
  std::size_t worst = 0;
  std::vector<QualityScore> scores;
  scores.reserve(leaves.size());
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    scores.push_back(score_sequence(lm, scorer, leaves[i].sequence, source_text, lang_pair));
    expected += leaves[i].probability * scores[i].value();
    if (scores[i].value() > scores[best].value()) best = i;
    if (scores[i].value() < scores[worst].value()) worst = i;
  }
  node.rollouts.push_back({leaves[best].sequence, scores[best]});
  if (worst != best) node.rollouts.push_back({leaves[worst].sequence, scores[worst]});
  node.value = expected;
  return node;
}

/// Keeps the higher-valued node; an exact tie goes to the earlier expansion slot.
inline std::pair<SearchNode, SearchNode> backprop_select(SearchNode a, SearchNode b) {
  require(a.value.has_value() && b.value.has_value(), "both nodes must be simulated");
  const bool b_wins = *b.value > *a.value || (*b.value == *a.value && b.slot < a.slot);
  if (b_wins) return {std::move(b), std::move(a)};
  return {std::move(a), std::move(b)};
}

inline const ScoredRollout& best_rollout(const SearchNode& node) {
  require(!node.rollouts.empty(), "node has no rollouts");
  const ScoredRollout* best = &node.rollouts.front();
  for (const auto& r : node.rollouts) {
    if (r.score.value() > best->score.value()) best = &r;
  }
  return *best;
}

/// Pairs the best rollout of each node and applies the gap filter. Identity
/// fields (pair_id, lang_pair, source_text, seed) are left for the caller.
inline EmitResult emit_pair(const SearchNode& winner, const SearchNode& loser, const PairgenConfig& cfg) {
  const auto& w = best_rollout(winner);
  const auto& l = best_rollout(loser);
  const double ws = w.score.value();
  const double ls = l.score.value();
  const std::size_t at = winner.prefix.continuation.size();
  if (ws < ls) return Rejection{RejectReason::kInverted, at, ws, ls};
  const double gap = ws - ls;
  if (gap < cfg.gap_min || gap == 0.0) return Rejection{RejectReason::kGapTooSmall, at, ws, ls};
  if (gap > cfg.gap_max) return Rejection{RejectReason::kGapTooLarge, at, ws, ls};

  PreferencePair p;
  p.level = Level::kToken;
  p.prefix = winner.prefix;
  p.chosen_token = winner.token;
  p.rejected_token = loser.token;
  p.chosen_rollout = w.sequence;
  p.rejected_rollout = l.sequence;
  p.chosen_score = w.score;
  p.rejected_score = l.score;
  p.seed = cfg.seed;
  return p;
}

struct TreeOptions {
  std::string lang_pair;
  std::string pair_id_prefix = "pair";
};

struct TreeResult {
  std::vector<PreferencePair> pairs;
  std::vector<Rejection> rejections;
  std::size_t cycles = 0;
  TokenSequence committed;
  std::vector<std::pair<TokenId, TokenId>> expansions;  // (winner, loser) per cycle

  std::map<std::string, std::size_t> rejection_histogram() const {
    std::map<std::string, std::size_t> h;
    for (const auto& r : rejections) ++h[std::string(to_string(r.reason))];
    return h;
  }
};

inline std::string make_pair_id(const std::string& prefix, std::size_t position) {
  std::string pos = std::to_string(position);
  if (pos.size() < 4) pos.insert(0, 4 - pos.size(), '0');
  return prefix + "-t" + pos;
}

/// Runs select/expand/simulate/backprop until EOS is committed or the prefix
/// reaches cfg.max_len. A step with a single possible token is committed
/// without a cycle.
inline TreeResult build_tree(const std::string& source_text, const PairgenConfig& cfg, const LanguageModel& lm,
                             const QualityScorer& scorer, const TreeOptions& opts = {}) {
  cfg.validate();
  TreeResult out;
  TokenSequence seq = lm.encode_source(source_text);
  while (!seq.terminated && seq.continuation.size() < cfg.max_len) {
    const auto top = lm.next_token_logits(seq, TopK::of(2));
    if (top.candidates.empty()) throw Error(ErrorCode::kDegenerateDistribution, "empty next-token distribution");
    if (top.candidates.size() == 1) {
      seq = seq.extended(top.candidates.front().token, lm.eos());
      continue;
    }

    auto [a, b] = expand(seq, lm);
    a = simulate(std::move(a), cfg, lm, scorer, source_text, opts.lang_pair);
    b = simulate(std::move(b), cfg, lm, scorer, source_text, opts.lang_pair);
    auto [winner, loser] = backprop_select(std::move(a), std::move(b));
    ++out.cycles;
    out.expansions.emplace_back(winner.token, loser.token);

    auto emitted = emit_pair(winner, loser, cfg);
    if (auto* pair = std::get_if<PreferencePair>(&emitted)) {
      pair->pair_id = make_pair_id(opts.pair_id_prefix, seq.continuation.size());
      pair->lang_pair = opts.lang_pair;
      pair->source_text = source_text;
      out.pairs.push_back(std::move(*pair));
    } else {
      out.rejections.push_back(std::get<Rejection>(emitted));
    }
    seq = seq.extended(winner.token, lm.eos());
  }
  out.committed = std::move(seq);
  return out;
}

}  // namespace tprm::pairgen
