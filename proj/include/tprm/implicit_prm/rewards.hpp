// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#pragma once

/**
 * Implicit process rewards from a (policy, reference) model pair.
 *
 * With beta > 0 and teacher-forced logprobs of a continuation y:
 *
 *   r_t   = beta * (log pi(y_t | y_<t) - log ref(y_t | y_<t))    per-token reward
 *   q_t   = r_0 + ... + r_t                                       cumulative reward
 *   q_T-1 = beta * log(pi(y) / ref(y))                            sequence log-ratio
 *   R_w   = sum_t r_t / (t + 1)                                   weighted sequence reward
 *
 * The telescoping identity q_T-1 == sequence log-ratio holds for any model
 * pair. That q_t also equals beta * log E_ref[exp(r(y) / beta) | y_<=t] only
 * holds at a preference-trained optimum, so it is not asserted here.
 *
 * Positions are 0-based over the continuation (the prompt is excluded); the
 * weight 1/(t+1) gives the first generated token weight 1. Natural log
 * throughout.
 */

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tprm/core/error.hpp"
#include "tprm/core/types.hpp"
#include "tprm/providers/language_model.hpp"

namespace tprm::prm {

struct RewardConfig {
  double beta = 0.1;

  void validate() const { require(beta > 0.0 && std::isfinite(beta), "beta must be positive"); }
};

struct RewardTrace {
  std::vector<TokenId> tokens;
  std::vector<std::string> token_text;
  std::vector<double> per_token_r;
  std::vector<double> cumulative_q;
  double sequence_logratio = 0.0;  // beta * log(pi(y) / ref(y))
  double weighted_sequence_reward = 0.0;
};

/// Both models must tokenize identically; the tag is the proxy for that.
inline void check_same_tokenizer(const LanguageModel& policy, const LanguageModel& reference) {
  if (policy.tag() != reference.tag()) {
    throw Error(ErrorCode::kTokenizerMismatch,
                "policy '" + policy.tag() + "' and reference '" + reference.tag() + "' tokenize differently");
  }
}

/// Sum of r_t / (t + 1).
inline double weighted_sequence_reward(std::span<const double> per_token_r) {
  double total = 0.0;
  for (std::size_t t = 0; t < per_token_r.size(); ++t) total += per_token_r[t] / static_cast<double>(t + 1);
  return total;
}

inline double weighted_sequence_reward(const RewardTrace& trace) { return weighted_sequence_reward(trace.per_token_r); }

/// Teacher-forced log-ratio differences d_t = log pi - log ref (beta not applied).
inline std::vector<double> logratio_terms(const TokenSequence& seq, const LanguageModel& policy,
                                          const LanguageModel& reference) {
  check_same_tokenizer(policy, reference);
  require(!seq.continuation.empty(), "continuation must be non-empty");
  const auto lp = policy.teacher_forced_logprobs(seq);
  const auto lr = reference.teacher_forced_logprobs(seq);
  std::vector<double> d(lp.size());
  for (std::size_t t = 0; t < lp.size(); ++t) d[t] = lp[t] - lr[t];
  return d;
}

inline RewardTrace per_token_rewards(const TokenSequence& seq, const LanguageModel& policy,
                                     const LanguageModel& reference, const RewardConfig& cfg) {
  cfg.validate();
  check_same_tokenizer(policy, reference);
  const auto lp = policy.teacher_forced_logprobs(seq);
  const auto lr = reference.teacher_forced_logprobs(seq);

  RewardTrace trace;
  trace.tokens = seq.continuation;
  trace.token_text.reserve(seq.continuation.size());
  for (TokenId id : seq.continuation) trace.token_text.push_back(policy.detokenize(std::span<const TokenId>(&id, 1)));

  double q = 0.0;
  double sum_policy = 0.0;
  double sum_reference = 0.0;
  for (std::size_t t = 0; t < lp.size(); ++t) {
    const double r = cfg.beta * (lp[t] - lr[t]);
    q += r;
    trace.per_token_r.push_back(r);
    trace.cumulative_q.push_back(q);
    sum_policy += lp[t];
    sum_reference += lr[t];
  }
  trace.sequence_logratio = cfg.beta * (sum_policy - sum_reference);
  trace.weighted_sequence_reward = weighted_sequence_reward(trace.per_token_r);
  return trace;
}

/// Logistic function, branch-on-sign so neither exp overflows.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// -log(sigmoid(x)) without cancellation or overflow.
inline double neg_log_sigmoid(double x) {
  if (x >= 0.0) return std::log1p(std::exp(-x));
  return -x + std::log1p(std::exp(x));
}

/// Bradley-Terry: P(w preferred over l) = exp(r_w) / (exp(r_w) + exp(r_l)).
inline double bt_preference_prob(double r_w, double r_l) {
  require(std::isfinite(r_w) && std::isfinite(r_l), "rewards must be finite");
  return sigmoid(r_w - r_l);
}

/// Preference between two trajectories from their summed per-token rewards,
/// taken in the telescoped form beta * log(pi(y) / ref(y)).
inline double trajectory_preference_prob(const RewardTrace& w, const RewardTrace& l) {
  require(!w.per_token_r.empty() && !l.per_token_r.empty(), "traces must be non-empty");
  return bt_preference_prob(w.sequence_logratio, l.sequence_logratio);
}

struct RewardComparison {
  double chosen;
  double rejected;
};

/// Mean log sigmoid(r_w - r_l) over scored comparisons: the outcome reward
/// model's training likelihood, evaluated forward only.
inline double orm_log_likelihood(std::span<const RewardComparison> comparisons) {
  require(!comparisons.empty(), "need at least one comparison");
  double total = 0.0;
  for (const auto& c : comparisons) total -= neg_log_sigmoid(c.chosen - c.rejected);
  return total / static_cast<double>(comparisons.size());
}

}  // namespace tprm::prm
