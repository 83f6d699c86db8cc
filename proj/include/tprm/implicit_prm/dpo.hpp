// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#pragma once

#include <cstddef>
#include <span>

#include "tprm/core/error.hpp"
#include "tprm/implicit_prm/rewards.hpp"
#include "tprm/pairgen/pairgen.hpp"
#include "tprm/providers/language_model.hpp"

namespace tprm::prm {

/// beta * log(pi(y) / ref(y)) over the full continuation of `seq`.
inline double sequence_logratio(const TokenSequence& seq, const LanguageModel& policy,
                                const LanguageModel& reference, const RewardConfig& cfg) {
  double total = 0.0;
  for (double d : logratio_terms(seq, policy, reference)) total += d;
  return cfg.beta * total;
}

/// Forward value of the DPO objective: mean over pairs of
/// -log sigmoid(beta * [log pi/ref (y_w) - log pi/ref (y_l)]). No gradients.
inline double dpo_loss_forward(std::span<const pairgen::PreferencePair> pairs, const LanguageModel& policy,
                               const LanguageModel& reference, const RewardConfig& cfg) {
  cfg.validate();
  require(!pairs.empty(), "need at least one preference pair");
  double total = 0.0;
  for (const auto& p : pairs) {
    const double margin = sequence_logratio(p.chosen_rollout, policy, reference, cfg) -
                          sequence_logratio(p.rejected_rollout, policy, reference, cfg);
    total += neg_log_sigmoid(margin);
  }
  return total / static_cast<double>(pairs.size());
}

}  // namespace tprm::prm
