// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#pragma once

/**
 * Exactly enumerable toy language models.
 *
 * Each toy model is a full-vocabulary categorical distribution conditioned on
 * some view of the context. Logits are ln p, so top-k order equals
 * probability order and every quantity downstream can be checked by brute
 * force.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tprm/core/error.hpp"
#include "tprm/core/types.hpp"
#include "tprm/providers/language_model.hpp"

namespace tprm {

/// Token texts plus greedy longest-match tokenization. EOS has a display
/// text but never matches input and renders as nothing.
class Vocabulary {
 public:
  Vocabulary(std::vector<std::string> tokens, std::string_view eos_text) : tokens_(std::move(tokens)) {
    require(!tokens_.empty(), "vocabulary must be non-empty");
    bool found_eos = false;
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      const auto& t = tokens_[i];
      require(!t.empty(), "vocabulary entries must be non-empty");
      if (t == eos_text) {
        require(!found_eos, "EOS listed twice");
        found_eos = true;
        eos_ = make_token(static_cast<std::uint32_t>(i));
        continue;
      }
      auto [it, inserted] = index_.emplace(t, make_token(static_cast<std::uint32_t>(i)));
      require(inserted, "duplicate vocabulary entry '" + t + "'");
      max_len_ = std::max(max_len_, t.size());
    }
    require(found_eos, "EOS text '" + std::string(eos_text) + "' not in vocabulary");
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  TokenId eos() const noexcept { return eos_; }
  const std::string& text(TokenId id) const { return tokens_.at(index_of(id)); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  TokenId id(std::string_view text) const {
    if (text == tokens_[index_of(eos_)]) return eos_;
    auto it = index_.find(std::string(text));
    if (it == index_.end()) {
      throw Error(ErrorCode::kUnknownToken, "'" + std::string(text) + "' is not a vocabulary entry");
    }
    return it->second;
  }

  std::vector<TokenId> tokenize(std::string_view s) const {
    std::vector<TokenId> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
      std::size_t take = std::min(max_len_, s.size() - pos);
      bool matched = false;
      for (; take > 0; --take) {
        auto it = index_.find(std::string(s.substr(pos, take)));
        if (it != index_.end()) {
          out.push_back(it->second);
          pos += take;
          matched = true;
          break;
        }
      }
      if (!matched) {
        throw Error(ErrorCode::kUnknownToken,
                    "no vocabulary entry matches input at byte " + std::to_string(pos));
      }
    }
    return out;
  }

  std::string detokenize(std::span<const TokenId> ids) const {
    std::string out;
    for (TokenId id : ids) {
      if (index_of(id) >= tokens_.size()) {
        throw Error(ErrorCode::kUnknownToken, "token id " + std::to_string(index_of(id)) + " out of range");
      }
      if (id != eos_) out += tokens_[index_of(id)];
    }
    return out;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId eos_{};
  std::size_t max_len_ = 0;
};

/// Base for toy models: subclasses supply the full next-token distribution.
class ToyLM : public LanguageModel {
 public:
  ToyLM(std::string tag, std::shared_ptr<const Vocabulary> vocab)
      : tag_(std::move(tag)), vocab_(std::move(vocab)) {
    require(vocab_ != nullptr, "toy model needs a vocabulary");
  }

  const std::string& tag() const override { return tag_; }
  std::size_t vocab_size() const override { return vocab_->size(); }
  TokenId eos() const override { return vocab_->eos(); }
  const Vocabulary& vocabulary() const { return *vocab_; }

  std::vector<TokenId> tokenize(std::string_view text) const override { return vocab_->tokenize(text); }
  std::string detokenize(std::span<const TokenId> ids) const override { return vocab_->detokenize(ids); }

  LogitsResult next_token_logits(const TokenSequence& seq, TopK k) const override {
    require(!seq.terminated, "no next token after EOS");
    check_sequence(seq);
    std::vector<TokenId> context;
    context.reserve(seq.prompt.size() + seq.continuation.size());
    context.insert(context.end(), seq.prompt.begin(), seq.prompt.end());
    context.insert(context.end(), seq.continuation.begin(), seq.continuation.end());
    return from_probabilities(probabilities(context, seq.prompt.size()), k);
  }

  /// Distribution over the whole vocabulary for the state `context`, whose
  /// first `prompt_len` entries are the prompt.
  virtual std::vector<double> probabilities(std::span<const TokenId> context,
                                            std::size_t prompt_len) const = 0;

 protected:
  static LogitsResult from_probabilities(const std::vector<double>& probs, TopK k) {
    double total = 0.0;
    for (double p : probs) {
      require(p >= 0.0 && std::isfinite(p), "toy probabilities must be finite and non-negative");
      total += p;
    }
    require(total > 0.0, "toy distribution has no mass");
    // Exactly normalized tables keep logprob == ln p bit-for-bit.
    const bool normalized = std::abs(total - 1.0) <= 1e-12;

    LogitsResult r;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] <= 0.0) continue;
      r.candidates.push_back({make_token(static_cast<std::uint32_t>(i)), std::log(probs[i]),
                              normalized ? std::log(probs[i]) : std::log(probs[i] / total)});
    }
    std::stable_sort(r.candidates.begin(), r.candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.logit != b.logit) return a.logit > b.logit;
      return index_of(a.token) < index_of(b.token);
    });
    if (!k.is_all() && k.value() < r.candidates.size()) {
      r.candidates.resize(k.value());
      r.complete = false;
    } else {
      r.complete = true;
    }
    return r;
  }

  void check_row(const std::vector<double>& row) const {
    require(row.size() == vocab_->size(), "distribution row size must equal vocabulary size");
  }

 private:
  std::string tag_;
  std::shared_ptr<const Vocabulary> vocab_;
};

/// Context-free categorical distribution.
class TableLM final : public ToyLM {
 public:
  TableLM(std::string tag, std::shared_ptr<const Vocabulary> vocab, std::vector<double> probs)
      : ToyLM(std::move(tag), std::move(vocab)), probs_(std::move(probs)) {
    check_row(probs_);
  }

  static std::shared_ptr<TableLM> uniform(std::string tag, std::shared_ptr<const Vocabulary> vocab) {
    const auto n = vocab->size();
    return std::make_shared<TableLM>(std::move(tag), std::move(vocab),
                                     std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  std::vector<double> probabilities(std::span<const TokenId>, std::size_t) const override { return probs_; }

 private:
  std::vector<double> probs_;
};

/// Order-2 model: the distribution depends on the previous token only.
/// Contexts without a row use the fallback row.
class NGramLM final : public ToyLM {
 public:
  NGramLM(std::string tag, std::shared_ptr<const Vocabulary> vocab,
          std::map<TokenId, std::vector<double>> rows, std::vector<double> fallback)
      : ToyLM(std::move(tag), std::move(vocab)), rows_(std::move(rows)), fallback_(std::move(fallback)) {
    check_row(fallback_);
    for (const auto& [prev, row] : rows_) check_row(row);
  }

  std::vector<double> probabilities(std::span<const TokenId> context, std::size_t) const override {
    auto it = rows_.find(context.back());
    return it == rows_.end() ? fallback_ : it->second;
  }

 private:
  std::map<TokenId, std::vector<double>> rows_;
  std::vector<double> fallback_;
};

/// Arbitrary context function; used for adversarial and tilted test worlds.
class ScriptedLM final : public ToyLM {
 public:
  using Fn = std::function<std::vector<double>(std::span<const TokenId> context, std::size_t prompt_len)>;

  ScriptedLM(std::string tag, std::shared_ptr<const Vocabulary> vocab, Fn fn)
      : ToyLM(std::move(tag), std::move(vocab)), fn_(std::move(fn)) {}

  std::vector<double> probabilities(std::span<const TokenId> context, std::size_t prompt_len) const override {
    auto row = fn_(context, prompt_len);
    check_row(row);
    return row;
  }

 private:
  Fn fn_;
};

}  // namespace tprm
