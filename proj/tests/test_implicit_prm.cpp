// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "tprm/implicit_prm/credit_report.hpp"
#include "tprm/implicit_prm/dpo.hpp"
#include "tprm/implicit_prm/rewards.hpp"

namespace tprm::prm {
namespace {

using testing::char_vocab;

struct RandomPair {
  std::shared_ptr<NGramLM> policy;
  std::shared_ptr<NGramLM> reference;
};

RandomPair random_pair(std::mt19937_64& rng, const std::string& letters) {
  const auto vocab = char_vocab(letters);
  return {testing::random_ngram("pair", vocab, rng, 0.05), testing::random_ngram("pair", vocab, rng, 0.05)};
}

TokenSequence random_sequence(const LanguageModel& lm, std::mt19937_64& rng) {
  auto start = lm.encode_source("ab");
  return lm.sample_rollout(start, 1.0, 1 + rng() % 32, rng());
}

TEST(PerTokenRewards, TelescopesToSequenceLogRatio) {
  std::mt19937_64 rng(2024);
  const RewardConfig cfg;
  for (int i = 0; i < 1000; ++i) {
    const auto [policy, reference] = random_pair(rng, "abcdef");
    const auto seq = random_sequence(i % 2 ? *policy : *reference, rng);
    const auto trace = per_token_rewards(seq, *policy, *reference, cfg);
    double sum = 0.0;
    for (double r : trace.per_token_r) sum += r;
    const double oracle = cfg.beta * (testing::oracle_log_likelihood(*policy, seq.prompt, seq.continuation) -
                                      testing::oracle_log_likelihood(*reference, seq.prompt, seq.continuation));
    ASSERT_NEAR(sum, oracle, 1e-9) << "case " << i;
    ASSERT_NEAR(trace.sequence_logratio, oracle, 1e-9);
    ASSERT_EQ(trace.cumulative_q.back(), sum);
    for (std::size_t t = 1; t < trace.per_token_r.size(); ++t) {
      ASSERT_EQ(trace.cumulative_q[t], trace.cumulative_q[t - 1] + trace.per_token_r[t]);
    }
  }
}

TEST(PerTokenRewards, TableAgainstUniform) {
  const auto vocab = char_vocab("AB");
  TableLM policy("t", vocab, {0.6, 0.3, 0.1});
  const auto reference = TableLM::uniform("t", vocab);
  auto seq = policy.encode_source("A");
  seq.continuation = make_tokens({0});
  const auto trace = per_token_rewards(seq, policy, *reference, RewardConfig{0.1});
  ASSERT_EQ(trace.per_token_r.size(), 1u);
  EXPECT_NEAR(trace.per_token_r[0], 0.1 * std::log(1.8), 1e-12);
  EXPECT_EQ(trace.weighted_sequence_reward, trace.per_token_r[0]);
  EXPECT_EQ(trace.token_text, std::vector<std::string>{"A"});
}

TEST(PerTokenRewards, IdenticalModelsGiveZero) {
  std::mt19937_64 rng(4);
  const auto lm = testing::random_ngram("same", char_vocab("abc"), rng, 0.1);
  auto seq = lm->encode_source("abc");
  seq.continuation = make_tokens({0, 2, 1});
  const auto trace = per_token_rewards(seq, *lm, *lm, RewardConfig{});
  EXPECT_EQ(trace.per_token_r, (std::vector<double>{0.0, 0.0, 0.0}));
  EXPECT_EQ(trace.cumulative_q.size(), 3u);
  EXPECT_EQ(trace.weighted_sequence_reward, 0.0);
}

TEST(PerTokenRewards, RejectsMismatchedTokenizersAndBadBeta) {
  const auto a = TableLM::uniform("a", char_vocab("x"));
  const auto b = TableLM::uniform("b", char_vocab("x"));
  auto seq = a->encode_source("x");
  seq.continuation = make_tokens({0});
  try {
    per_token_rewards(seq, *a, *b, RewardConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTokenizerMismatch);
  }
  EXPECT_THROW(per_token_rewards(seq, *a, *a, RewardConfig{0.0}), Error);
}

TEST(WeightedReward, PositionalWeights) {
  EXPECT_EQ(weighted_sequence_reward(std::vector<double>{0.3, 0.2, 0.3}), 0.5);
  EXPECT_EQ(weighted_sequence_reward(std::vector<double>{0.0, 0.0}), 0.0);
  EXPECT_EQ(weighted_sequence_reward(std::vector<double>{-0.7}), -0.7);
}

TEST(WeightedReward, PureFunctionOfInputs) {
  std::mt19937_64 rng(11);
  const auto [policy, reference] = random_pair(rng, "abc");
  const auto seq = random_sequence(*policy, rng);
  const auto a = per_token_rewards(seq, *policy, *reference, RewardConfig{});
  const auto b = per_token_rewards(seq, *policy, *reference, RewardConfig{});
  EXPECT_EQ(a.weighted_sequence_reward, b.weighted_sequence_reward);
  EXPECT_EQ(weighted_sequence_reward(a), a.weighted_sequence_reward);
}

TEST(BradleyTerry, ClosedFormsAndStability) {
  EXPECT_EQ(bt_preference_prob(0.4, 0.4), 0.5);
  EXPECT_NEAR(bt_preference_prob(std::log(3.0), 0.0), 0.75, 1e-15);
  EXPECT_GE(bt_preference_prob(1000.0, 0.0), 1.0 - 1e-12);
  EXPECT_LE(bt_preference_prob(-1000.0, 0.0), 1e-12);
  EXPECT_TRUE(std::isfinite(bt_preference_prob(700.0, -700.0)));
  EXPECT_THROW(bt_preference_prob(kNegInf, 0.0), Error);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-700.0, 700.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng);
    const double b = u(rng);
    EXPECT_NEAR(bt_preference_prob(a, b) + bt_preference_prob(b, a), 1.0, 1e-12);
  }
}

TEST(BradleyTerry, TrajectoryProbabilityUsesTelescopedSums) {
  const auto vocab = char_vocab("ab");
  TableLM policy("t", vocab, {0.6, 0.2, 0.2});
  const auto reference = TableLM::uniform("t", vocab);
  auto w = policy.encode_source("a");
  w.continuation = make_tokens({0});
  auto l = w;
  l.continuation = make_tokens({1});
  const RewardConfig cfg{1.0};
  const auto tw = per_token_rewards(w, policy, *reference, cfg);
  const auto tl = per_token_rewards(l, policy, *reference, cfg);
  EXPECT_NEAR(trajectory_preference_prob(tw, tl), 0.75, 1e-12);
  EXPECT_EQ(trajectory_preference_prob(tw, tw), 0.5);
  EXPECT_EQ(trajectory_preference_prob(tw, tl), bt_preference_prob(tw.sequence_logratio, tl.sequence_logratio));
}

TEST(Orm, ForwardLikelihood) {
  const std::vector<RewardComparison> even{{0.2, 0.2}, {1.0, 1.0}};
  EXPECT_NEAR(orm_log_likelihood(even), std::log(0.5), 1e-15);
  const std::vector<RewardComparison> one{{std::log(3.0), 0.0}};
  EXPECT_NEAR(orm_log_likelihood(one), std::log(0.75), 1e-15);
  EXPECT_THROW(orm_log_likelihood(std::vector<RewardComparison>{}), Error);
}

pairgen::PreferencePair pair_of(TokenSequence chosen, TokenSequence rejected) {
  pairgen::PreferencePair p;
  p.chosen_rollout = std::move(chosen);
  p.rejected_rollout = std::move(rejected);
  return p;
}

TEST(Dpo, IdenticalModelsGiveLn2) {
  std::mt19937_64 rng(21);
  const auto lm = testing::random_ngram("m", char_vocab("abcd"), rng, 0.1);
  std::vector<pairgen::PreferencePair> pairs;
  for (int i = 0; i < 5; ++i) pairs.push_back(pair_of(random_sequence(*lm, rng), random_sequence(*lm, rng)));
  EXPECT_EQ(dpo_loss_forward(pairs, *lm, *lm, RewardConfig{}), std::log(2.0));
}

TEST(Dpo, KnownAdvantage) {
  const auto vocab = char_vocab("ab");
  TableLM policy("t", vocab, {0.6, 0.2, 0.2});
  const auto reference = TableLM::uniform("t", vocab);
  auto w = policy.encode_source("a");
  w.continuation = make_tokens({0});
  auto l = w;
  l.continuation = make_tokens({1});
  const std::vector<pairgen::PreferencePair> pairs{pair_of(w, l)};
  EXPECT_NEAR(dpo_loss_forward(pairs, policy, *reference, RewardConfig{1.0}), -std::log(0.75), 1e-12);
  EXPECT_THROW(dpo_loss_forward(std::vector<pairgen::PreferencePair>{}, policy, *reference, RewardConfig{}), Error);
  const auto other = TableLM::uniform("other", vocab);
  EXPECT_THROW(dpo_loss_forward(pairs, policy, *other, RewardConfig{}), Error);
}

TEST(BetaScaling, PreferenceSignIsInvariant) {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 300; ++i) {
    const auto [policy, reference] = random_pair(rng, "abcd");
    const auto w = random_sequence(*policy, rng);
    const auto l = random_sequence(*reference, rng);
    const auto sign = [&](double beta) {
      const RewardConfig cfg{beta};
      const double d = sequence_logratio(w, *policy, *reference, cfg) - sequence_logratio(l, *policy, *reference, cfg);
      return (d > 0) - (d < 0);
    };
    ASSERT_EQ(sign(0.1), sign(2.5));
    ASSERT_EQ(sign(0.1), sign(0.003));
  }
}

TEST(CreditReport, ClearlyWrongWordsArePenalized) {
  const auto world = testing::credit_world();
  const RewardConfig cfg;
  const auto a = credit_report(world.a, *world.policy, *world.reference, cfg);
  const auto b = credit_report(world.b, *world.policy, *world.reference, cfg);
  const auto c = credit_report(world.c, *world.policy, *world.reference, cfg);
  EXPECT_LT(b.per_token_r[world.wrong_b], 0.0);
  EXPECT_LT(c.per_token_r[world.wrong_c], 0.0);
  EXPECT_GT(a.per_token_r[world.wrong_b], 0.0);
  EXPECT_GT(a.weighted_reward, c.weighted_reward);
  EXPECT_GT(c.weighted_reward, b.weighted_reward);
  EXPECT_EQ(a.tokens.size(), world.a.continuation.size());
  EXPECT_EQ(a.hypothesis_text, "Against an bright bill hefty prices");
}

TEST(CreditReport, TableLayout) {
  const auto world = testing::credit_world();
  ConstantScorer scorer(0.8);
  const auto r = credit_report(world.a, *world.policy, *world.policy, RewardConfig{}, &scorer);
  const auto tsv = to_tsv(r, "Translation A", 2);
  EXPECT_EQ(tsv,
            "Translation A\t'Against'\t' an'\t' bright'\t' bill'\t' hefty'\t' prices'\t''\t"
            "Weighted Implicit Rewards\tQuality\n"
            "Reward\t0.00\t0.00\t0.00\t0.00\t0.00\t0.00\t0.00\t0.00\t0.80\n");
  const auto j = to_json(r);
  EXPECT_EQ(j.at("tokens").size(), 7u);
  EXPECT_EQ(j.at("quality"), 0.8);
  EXPECT_EQ(j.at("tokens")[2].at("text"), " bright");

  const auto unscored = credit_report(world.a, *world.policy, *world.reference, RewardConfig{});
  EXPECT_FALSE(unscored.quality.has_value());
  EXPECT_TRUE(to_json(unscored).at("quality").is_null());
  EXPECT_NE(to_tsv(unscored).find("\t-\n"), std::string::npos);
}

}  // namespace
}  // namespace tprm::prm
