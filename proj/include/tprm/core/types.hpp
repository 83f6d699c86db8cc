// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "tprm/core/error.hpp"

namespace tprm {

/// Index into a provider's vocabulary. Ids are opaque outside the provider
/// (identified by its tag) that produced them.
enum class TokenId : std::uint32_t {};

constexpr std::uint32_t index_of(TokenId id) noexcept { return static_cast<std::uint32_t>(id); }
constexpr TokenId make_token(std::uint32_t index) noexcept { return static_cast<TokenId>(index); }

inline std::vector<TokenId> make_tokens(const std::vector<std::uint32_t>& indices) {
  std::vector<TokenId> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(make_token(i));
  return out;
}

inline std::vector<std::uint32_t> token_indices(const std::vector<TokenId>& ids) {
  std::vector<std::uint32_t> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(index_of(id));
  return out;
}

/// Candidate window for next-token queries: either the top `k` or the whole support.
class TopK {
 public:
  static constexpr TopK all() noexcept { return TopK(0); }
  static TopK of(std::size_t k) {
    require(k > 0, "top-k window must be positive");
    return TopK(k);
  }

  constexpr bool is_all() const noexcept { return k_ == 0; }
  constexpr std::size_t value() const noexcept { return k_; }

 private:
  constexpr explicit TopK(std::size_t k) noexcept : k_(k) {}
  std::size_t k_;
};

struct Candidate {
  TokenId token;
  double logit;
  double logprob;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Next-token distribution slice. Candidates are ordered by logit descending,
/// ties by ascending token id. Tokens with zero probability are never listed;
/// `complete` means every token with nonzero probability is present.
struct LogitsResult {
  std::vector<Candidate> candidates;
  bool complete = false;
};

/// Reference-free quality estimate in [0, 1].
class QualityScore {
 public:
  QualityScore() = default;
  explicit QualityScore(double value) : value_(value) {
    if (!(value >= 0.0 && value <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "quality score outside [0, 1]: " + std::to_string(value));
    }
  }

  double value() const noexcept { return value_; }
  friend bool operator==(const QualityScore&, const QualityScore&) = default;

 private:
  double value_ = 0.0;
};

/// Prompt (source plus instruction) and generated continuation, both in the
/// id space of `provider_tag`. The state at step t is prompt + continuation[0, t).
struct TokenSequence {
  std::string provider_tag;
  std::vector<TokenId> prompt;
  std::vector<TokenId> continuation;
  bool terminated = false;

  /// Returns a copy with `token` appended; marks termination when it is `eos`.
  TokenSequence extended(TokenId token, TokenId eos) const {
    require(!terminated, "cannot extend a terminated sequence");
    TokenSequence out = *this;
    out.continuation.push_back(token);
    out.terminated = (token == eos);
    return out;
  }

  /// Copy holding the first `n` continuation tokens (never terminated unless
  /// the kept tail ends in `eos`).
  TokenSequence truncated(std::size_t n, TokenId eos) const {
    require(n <= continuation.size(), "truncation past continuation length");
    TokenSequence out{provider_tag, prompt, {continuation.begin(), continuation.begin() + n}, false};
    out.terminated = !out.continuation.empty() && out.continuation.back() == eos;
    return out;
  }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace tprm
