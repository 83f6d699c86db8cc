// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#pragma once

/**
 * Pairwise-accuracy benchmark for process reward models.
 *
 * Each item holds a shared prefix and a chosen/rejected alternative. Token
 * items compare the implicit reward of the single next token; sequence items
 * compare the weighted sequence reward of the full continuations. An item is
 * correct iff the chosen side scores strictly higher; exact ties count as
 * incorrect and are reported separately.
 *
 * beta > 0 scales both sides alike, so verdicts are taken on the unscaled
 * log-ratios and are exactly beta-invariant.
 */

#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tprm/core/error.hpp"
#include "tprm/core/parallel.hpp"
#include "tprm/core/text.hpp"
#include "tprm/implicit_prm/rewards.hpp"
#include "tprm/pairgen/pair_io.hpp"
#include "tprm/providers/language_model.hpp"

namespace tprm::bench {

using BenchItem = pairgen::PairRecord;
using pairgen::Level;

inline std::vector<BenchItem> load_bench(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open benchmark '" + path + "'");
  return pairgen::read_records(in);
}

/// The same item with chosen and rejected exchanged.
inline BenchItem flipped(BenchItem item) {
  std::swap(item.chosen_token_id, item.rejected_token_id);
  std::swap(item.chosen_text, item.rejected_text);
  std::swap(item.chosen_score, item.rejected_score);
  return item;
}

enum class Verdict { kCorrect, kIncorrect, kTie };

struct Judgement {
  Verdict verdict = Verdict::kTie;
  double chosen_reward = 0.0;  // beta-scaled
  double rejected_reward = 0.0;
};

namespace detail {

inline Verdict compare(double chosen, double rejected) {
  if (std::isnan(chosen) || std::isnan(rejected)) {
    throw Error(ErrorCode::kInvalidArgument, "reward undefined (token outside both supports)");
  }
  if (chosen > rejected) return Verdict::kCorrect;
  if (chosen < rejected) return Verdict::kIncorrect;
  return Verdict::kTie;
}

inline TokenSequence full_sequence(const TokenSequence& prefix, const LanguageModel& lm, const std::string& text) {
  TokenSequence seq = prefix;
  for (TokenId id : lm.tokenize(text)) seq.continuation.push_back(id);
  seq.continuation.push_back(lm.eos());
  seq.terminated = true;
  return seq;
}

}  // namespace detail

/// Sequence-level continuations are complete responses: EOS is appended after
/// tokenizing chosen_text / rejected_text.
inline Judgement judge_item(const BenchItem& item, const LanguageModel& policy, const LanguageModel& reference,
                            const prm::RewardConfig& cfg) {
  cfg.validate();
  prm::check_same_tokenizer(policy, reference);
  if (item.provider_tag != policy.tag()) {
    throw Error(ErrorCode::kTokenizerMismatch,
                "item " + item.pair_id + " uses tokenizer '" + item.provider_tag + "', PRM uses '" + policy.tag() + "'");
  }
  TokenSequence prefix = policy.encode_source(item.source_text);
  prefix.continuation = item.prefix_token_ids;
  policy.check_sequence(prefix);

  double chosen = 0.0;
  double rejected = 0.0;
  if (item.level == Level::kToken) {
    chosen = policy.token_logprob(prefix, item.chosen_token_id) - reference.token_logprob(prefix, item.chosen_token_id);
    rejected =
        policy.token_logprob(prefix, item.rejected_token_id) - reference.token_logprob(prefix, item.rejected_token_id);
  } else {
    chosen = prm::weighted_sequence_reward(
        prm::logratio_terms(detail::full_sequence(prefix, policy, item.chosen_text), policy, reference));
    rejected = prm::weighted_sequence_reward(
        prm::logratio_terms(detail::full_sequence(prefix, policy, item.rejected_text), policy, reference));
  }
  return {detail::compare(chosen, rejected), cfg.beta * chosen, cfg.beta * rejected};
}

struct Counts {
  std::size_t items = 0;
  std::size_t correct = 0;
  std::size_t incorrect = 0;
  std::size_t ties = 0;
  std::size_t errors = 0;

  double accuracy() const { return items == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(items); }
  double tie_rate() const { return items == 0 ? 0.0 : static_cast<double>(ties) / static_cast<double>(items); }
};

struct LevelReport {
  std::map<std::string, Counts> per_direction;
  std::optional<double> en_xx;    // mean accuracy over en-* directions
  std::optional<double> xx_en;    // mean accuracy over *-en directions
  std::optional<double> average;  // mean over every direction, unweighted
  Counts counts;
};

struct BenchReport {
  std::map<Level, LevelReport> levels;
  Counts counts;
  std::vector<std::string> errors;  // "pair_id: message"

  double accuracy() const { return counts.accuracy(); }
  double tie_rate() const { return counts.tie_rate(); }
};

namespace detail {

inline void add(Counts& c, std::optional<Verdict> v) {
  ++c.items;
  if (!v) {
    ++c.errors;
    return;
  }
  switch (*v) {
    case Verdict::kCorrect: ++c.correct; break;
    case Verdict::kIncorrect: ++c.incorrect; break;
    case Verdict::kTie: ++c.ties; break;
  }
}

inline std::optional<double> mean(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  double total = 0.0;
  for (double x : xs) total += x;
  return total / static_cast<double>(xs.size());
}

}  // namespace detail

/// Judges every item (on up to `jobs` threads) and folds the verdicts in item
/// order. Items whose judgement fails are counted as errors, never as correct.
inline BenchReport accuracy(const std::vector<BenchItem>& items, const LanguageModel& policy,
                            const LanguageModel& reference, const prm::RewardConfig& cfg, std::size_t jobs = 1) {
  require(!items.empty(), "benchmark has no items");
  std::vector<std::optional<Verdict>> verdicts(items.size());
  std::vector<std::string> failures(items.size());
  parallel_for(items.size(), jobs, [&](std::size_t i) {
    try {
      verdicts[i] = judge_item(items[i], policy, reference, cfg).verdict;
    } catch (const Error& e) {
      failures[i] = items[i].pair_id + ": " + e.what();
    }
  });

  BenchReport report;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& level = report.levels[items[i].level];
    detail::add(report.counts, verdicts[i]);
    detail::add(level.counts, verdicts[i]);
    detail::add(level.per_direction[items[i].lang_pair], verdicts[i]);
    if (!verdicts[i]) report.errors.push_back(failures[i]);
  }
  for (auto& [lvl, level] : report.levels) {
    std::vector<double> all, en_xx, xx_en;
    for (const auto& [lp, c] : level.per_direction) {
      all.push_back(c.accuracy());
      const auto parts = text::split(lp, '-');
      if (parts.size() == 2 && parts[0] == "en" && parts[1] != "en") en_xx.push_back(c.accuracy());
      if (parts.size() == 2 && parts[1] == "en" && parts[0] != "en") xx_en.push_back(c.accuracy());
    }
    level.en_xx = detail::mean(en_xx);
    level.xx_en = detail::mean(xx_en);
    level.average = detail::mean(all);
  }
  return report;
}

inline nlohmann::ordered_json to_json(const Counts& c) {
  return {{"items", c.items},          {"correct", c.correct},   {"incorrect", c.incorrect},
          {"ties", c.ties},            {"errors", c.errors},     {"accuracy", c.accuracy()},
          {"tie_rate", c.tie_rate()}};
}

inline nlohmann::ordered_json to_json(const BenchReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr); };
  nlohmann::ordered_json levels = nlohmann::ordered_json::object();
  for (const auto& [lvl, level] : r.levels) {
    nlohmann::ordered_json dirs = nlohmann::ordered_json::object();
    for (const auto& [lp, c] : level.per_direction) dirs[lp] = to_json(c);
    levels[std::string(pairgen::to_string(lvl))] = {{"per_direction", dirs},
                                                    {"en_xx", opt(level.en_xx)},
                                                    {"xx_en", opt(level.xx_en)},
                                                    {"average", opt(level.average)},
                                                    {"counts", to_json(level.counts)}};
  }
  nlohmann::ordered_json j;
  j["tie_convention"] = "ties count as incorrect (strict >)";
  j["accuracy"] = r.accuracy();
  j["tie_rate"] = r.tie_rate();
  j["counts"] = to_json(r.counts);
  j["levels"] = std::move(levels);
  j["errors"] = r.errors;
  return j;
}

/// level, lang_pair, items, correct, incorrect, ties, errors, accuracy.
inline std::string to_tsv(const BenchReport& r) {
  std::string out = "level\tlang_pair\titems\tcorrect\tincorrect\tties\terrors\taccuracy\n";
  auto row = [&](std::string_view level, std::string_view lp, const Counts& c) {
    out += std::string(level) + "\t" + std::string(lp) + "\t" + std::to_string(c.items) + "\t" +
           std::to_string(c.correct) + "\t" + std::to_string(c.incorrect) + "\t" + std::to_string(c.ties) + "\t" +
           std::to_string(c.errors) + "\t" + text::format_fixed(c.accuracy(), 4) + "\n";
  };
  for (const auto& [lvl, level] : r.levels) {
    for (const auto& [lp, c] : level.per_direction) row(pairgen::to_string(lvl), lp, c);
    row(pairgen::to_string(lvl), "all", level.counts);
  }
  row("all", "all", r.counts);
  return out;
}

/// One-row markdown table: EN->XX, XX->EN and Avg. for each level.
inline std::string to_markdown(const BenchReport& r, std::string_view model = "PRM") {
  auto cell = [](const std::optional<double>& v) { return v ? text::format_fixed(*v, 3) : std::string("-"); };
  std::string head = "| Model |";
  std::string rule = "|---|";
  std::string row = "| " + std::string(model) + " |";
  for (Level lvl : {Level::kSequence, Level::kToken}) {
    const std::string name = lvl == Level::kSequence ? "Sequence" : "Token";
    head += " " + name + " EN→XX | " + name + " XX→EN | " + name + " Avg. |";
    rule += "---|---|---|";
    auto it = r.levels.find(lvl);
    if (it == r.levels.end()) {
      row += " - | - | - |";
    } else {
      row += " " + cell(it->second.en_xx) + " | " + cell(it->second.xx_en) + " | " + cell(it->second.average) + " |";
    }
  }
  return head + "\n" + rule + "\n" + row + "\n";
}

}  // namespace tprm::bench
