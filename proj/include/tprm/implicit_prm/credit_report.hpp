// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#pragma once

// Per-token credit assignment table: one column per generated token with its
// implicit reward, then the weighted sequence reward and (optionally) an
// external quality score.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tprm/core/text.hpp"
#include "tprm/implicit_prm/rewards.hpp"
#include "tprm/providers/language_model.hpp"
#include "tprm/providers/scorer.hpp"

namespace tprm::prm {

struct CreditReport {
  std::string source_text;
  std::string hypothesis_text;
  std::vector<TokenId> tokens;
  std::vector<std::string> token_text;
  std::vector<double> per_token_r;
  std::vector<double> cumulative_q;
  double weighted_reward = 0.0;
  double sequence_logratio = 0.0;
  std::optional<double> quality;
};

inline CreditReport credit_report(const TokenSequence& seq, const LanguageModel& policy,
                                  const LanguageModel& reference, const RewardConfig& cfg,
                                  const QualityScorer* scorer = nullptr, std::string_view lang_pair = {}) {
  const auto trace = per_token_rewards(seq, policy, reference, cfg);
  const auto text = detokenize_sequence(policy, seq);
  CreditReport report{text.source,
                      text.hypothesis,
                      trace.tokens,
                      trace.token_text,
                      trace.per_token_r,
                      trace.cumulative_q,
                      trace.weighted_sequence_reward,
                      trace.sequence_logratio,
                      std::nullopt};
  if (scorer != nullptr) report.quality = scorer->score(text.source, text.hypothesis, lang_pair).value();
  return report;
}

/// Two rows: quoted tokens with the trailing column headers, then the values.
inline std::string to_tsv(const CreditReport& r, std::string_view label = "Translation", int digits = 4) {
  std::string head(label);
  std::string values = "Reward";
  for (std::size_t i = 0; i < r.token_text.size(); ++i) {
    head += "\t'" + r.token_text[i] + "'";
    values += "\t" + text::format_fixed(r.per_token_r[i], digits);
  }
  head += "\tWeighted Implicit Rewards\tQuality";
  values += "\t" + text::format_fixed(r.weighted_reward, digits);
  values += "\t" + (r.quality ? text::format_fixed(*r.quality, digits) : std::string("-"));
  return head + "\n" + values + "\n";
}

inline nlohmann::ordered_json to_json(const CreditReport& r) {
  nlohmann::ordered_json tokens = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.tokens.size(); ++i) {
    tokens.push_back({{"id", index_of(r.tokens[i])},
                      {"text", r.token_text[i]},
                      {"reward", r.per_token_r[i]},
                      {"cumulative", r.cumulative_q[i]}});
  }
  nlohmann::ordered_json j;
  j["source_text"] = r.source_text;
  j["hypothesis_text"] = r.hypothesis_text;
  j["tokens"] = std::move(tokens);
  j["weighted_reward"] = r.weighted_reward;
  j["sequence_logratio"] = r.sequence_logratio;
  j["quality"] = r.quality ? nlohmann::ordered_json(*r.quality) : nlohmann::ordered_json(nullptr);
  return j;
}

}  // namespace tprm::prm
