// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#pragma once

/**
 * Pluggable language-model abstraction.
 *
 * Every consumer (pair generation, implicit rewards, the benchmark, reward
 * guided decoding) talks to a model only through LanguageModel. Local toy
 * models and the remote client implement the same surface, so a fixture
 * served over the wire must answer exactly like its local twin.
 *
 * Implementations are immutable after construction and safe to share across
 * threads. Rollout sampling takes an explicit seed; no implementation may use
 * ambient entropy.
 */

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tprm/core/error.hpp"
#include "tprm/core/rng.hpp"
#include "tprm/core/types.hpp"

namespace tprm {

inline constexpr std::size_t kDefaultMaxLen = 256;

/// Unnormalized sampling weights exp((logit - max_logit) / temperature), in
/// candidate order. Temperature only ever applies to sampling; top-k
/// selection always uses raw logits.
inline std::vector<double> tempered_weights(const LogitsResult& r, double temperature) {
  require(temperature > 0.0, "temperature must be positive");
  std::vector<double> w;
  w.reserve(r.candidates.size());
  if (r.candidates.empty()) return w;
  const double top = r.candidates.front().logit;
  for (const auto& c : r.candidates) w.push_back(std::exp((c.logit - top) / temperature));
  return w;
}

/// Normalized tempered distribution over the listed candidates.
inline std::vector<double> tempered_probs(const LogitsResult& r, double temperature) {
  auto w = tempered_weights(r, temperature);
  double total = 0.0;
  for (double x : w) total += x;
  for (double& x : w) x /= total;
  return w;
}

/// Inverse-CDF draw: first candidate whose cumulative weight exceeds u * total.
inline std::size_t sample_index(const LogitsResult& r, double temperature, double u) {
  const auto w = tempered_weights(r, temperature);
  if (w.empty()) throw Error(ErrorCode::kDegenerateDistribution, "no candidate to sample");
  double total = 0.0;
  for (double x : w) total += x;
  const double target = u * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    cum += w[i];
    if (target < cum) return i;
  }
  return w.size() - 1;
}

class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  /// Identifies the tokenizer; sequences from another tag are rejected.
  virtual const std::string& tag() const = 0;
  virtual std::size_t vocab_size() const = 0;
  virtual TokenId eos() const = 0;

  /// Top-k (or all) next-token candidates for the state prompt + continuation.
  virtual LogitsResult next_token_logits(const TokenSequence& seq, TopK k) const = 0;

  virtual std::vector<TokenId> tokenize(std::string_view text) const = 0;
  virtual std::string detokenize(std::span<const TokenId> ids) const = 0;

  /// log p(continuation[i] | prompt, continuation[0, i)) for every i.
  /// A token outside the support gets -inf.
  virtual std::vector<double> teacher_forced_logprobs(const TokenSequence& seq) const {
    require(!seq.continuation.empty(), "teacher forcing needs a non-empty continuation");
    check_sequence(seq);
    std::vector<double> out;
    out.reserve(seq.continuation.size());
    TokenSequence state{seq.provider_tag, seq.prompt, {}, false};
    state.continuation.reserve(seq.continuation.size());
    for (TokenId tok : seq.continuation) {
      const auto r = next_token_logits(state, TopK::all());
      double lp = kNegInf;
      for (const auto& c : r.candidates) {
        if (c.token == tok) {
          lp = c.logprob;
          break;
        }
      }
      out.push_back(lp);
      state.continuation.push_back(tok);
    }
    return out;
  }

  /// Extends `seq` by sampling at `temperature` until EOS or until the
  /// continuation holds `max_len` tokens (then not terminated).
  virtual TokenSequence sample_rollout(const TokenSequence& seq, double temperature,
                                       std::size_t max_len, std::uint64_t seed) const {
    require(!seq.terminated, "cannot roll out a terminated sequence");
    require(temperature > 0.0, "temperature must be positive");
    check_sequence(seq);
    SplitMix64 rng(seed);
    TokenSequence out = seq;
    while (!out.terminated && out.continuation.size() < max_len) {
      const auto r = next_token_logits(out, TopK::all());
      const auto idx = sample_index(r, temperature, rng.next_double());
      const TokenId tok = r.candidates[idx].token;
      out.continuation.push_back(tok);
      out.terminated = (tok == eos());
    }
    return out;
  }

  /// log p(token | seq); -inf outside the support. Local models answer from
  /// one full-support query, remote ones override with teacher forcing.
  virtual double token_logprob(const TokenSequence& seq, TokenId token) const {
    require(!seq.terminated, "no next token after EOS");
    check_ids(std::span<const TokenId>(&token, 1));
    const auto r = next_token_logits(seq, TopK::all());
    for (const auto& c : r.candidates) {
      if (c.token == token) return c.logprob;
    }
    return kNegInf;
  }

  /// Builds the initial state for a source text.
  TokenSequence encode_source(std::string_view source) const {
    require(!source.empty(), "source text must be non-empty");
    TokenSequence seq{tag(), tokenize(source), {}, false};
    require(!seq.prompt.empty(), "source tokenizes to an empty prompt");
    return seq;
  }

  /// Validates tag, id range and the EOS-termination invariant.
  void check_sequence(const TokenSequence& seq) const {
    if (seq.provider_tag != tag()) {
      throw Error(ErrorCode::kTokenizerMismatch,
                  "sequence tagged '" + seq.provider_tag + "' given to provider '" + tag() + "'");
    }
    require(!seq.prompt.empty(), "prompt must be non-empty");
    check_ids(seq.prompt);
    check_ids(seq.continuation);
    if (seq.terminated && (seq.continuation.empty() || seq.continuation.back() != eos())) {
      throw Error(ErrorCode::kInvalidArgument, "terminated sequence must end in EOS");
    }
  }

  void check_ids(std::span<const TokenId> ids) const {
    for (TokenId id : ids) {
      if (index_of(id) >= vocab_size()) {
        throw Error(ErrorCode::kUnknownToken, "token id " + std::to_string(index_of(id)) +
                                                  " outside vocabulary of '" + tag() + "' (size " +
                                                  std::to_string(vocab_size()) + ")");
      }
    }
  }
};

struct SequenceText {
  std::string source;
  std::string hypothesis;
};

/// Source and hypothesis text of a sequence. EOS renders as nothing.
inline SequenceText detokenize_sequence(const LanguageModel& lm, const TokenSequence& seq) {
  lm.check_sequence(seq);
  return {lm.detokenize(seq.prompt), lm.detokenize(seq.continuation)};
}

}  // namespace tprm
