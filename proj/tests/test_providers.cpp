// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

#include <json.hpp>

#include "support/oracles.hpp"
#include "tprm/providers/language_model.hpp"
#include "tprm/providers/scorer.hpp"
#include "tprm/providers/toy_io.hpp"
#include "tprm/providers/toy_lm.hpp"

namespace tprm {
namespace {

using testing::char_vocab;

// Vocabulary A, B, EOS with the context-free table {A:0.6, B:0.3, EOS:0.1}.
std::shared_ptr<TableLM> abc_table() {
  auto vocab = std::make_shared<const Vocabulary>(std::vector<std::string>{"A", "B", "</s>"}, "</s>");
  return std::make_shared<TableLM>("abc", vocab, std::vector<double>{0.6, 0.3, 0.1});
}

TEST(TableLM, TopTwo) {
  const auto lm = abc_table();
  const auto seq = lm->encode_source("AB");
  const auto r = lm->next_token_logits(seq, TopK::of(2));
  ASSERT_EQ(r.candidates.size(), 2u);
  EXPECT_FALSE(r.complete);
  EXPECT_EQ(r.candidates[0].token, make_token(0));
  EXPECT_EQ(r.candidates[0].logprob, std::log(0.6));
  EXPECT_EQ(r.candidates[1].token, make_token(1));
  EXPECT_EQ(r.candidates[1].logprob, std::log(0.3));
}

TEST(TableLM, UniformOverFourIsAscendingIds) {
  auto lm = TableLM::uniform("u4", char_vocab("abc"));
  const auto r = lm->next_token_logits(lm->encode_source("a"), TopK::all());
  ASSERT_EQ(r.candidates.size(), 4u);
  EXPECT_TRUE(r.complete);
  for (std::uint32_t i = 0; i < 4; ++i) {
    EXPECT_EQ(r.candidates[i].token, make_token(i));
    EXPECT_DOUBLE_EQ(r.candidates[i].logprob, std::log(0.25));
  }
}

TEST(TableLM, TerminatedSequenceIsRejected) {
  const auto lm = abc_table();
  auto seq = lm->encode_source("A").extended(lm->eos(), lm->eos());
  EXPECT_THROW(lm->next_token_logits(seq, TopK::all()), Error);
}

TEST(TableLM, EqualLogitsBreakTiesByLowerId) {
  auto vocab = char_vocab("xyz");
  TableLM lm("tie", vocab, {0.2, 0.4, 0.4, 0.0});
  const auto r = lm.next_token_logits(lm.encode_source("x"), TopK::all());
  ASSERT_EQ(r.candidates.size(), 3u);  // zero-probability EOS is not listed
  EXPECT_EQ(r.candidates[0].token, make_token(1));
  EXPECT_EQ(r.candidates[1].token, make_token(2));
  EXPECT_EQ(r.candidates[2].token, make_token(0));
}

TEST(TeacherForced, UniformAndTable) {
  auto u = TableLM::uniform("u4", char_vocab("abc"));
  auto seq = u->encode_source("ab");
  seq.continuation = make_tokens({0, 1, 2});
  for (double lp : u->teacher_forced_logprobs(seq)) EXPECT_DOUBLE_EQ(lp, std::log(0.25));

  const auto t = abc_table();
  auto s2 = t->encode_source("A");
  s2.continuation = make_tokens({0, 1, 2});
  s2.terminated = true;
  const auto lps = t->teacher_forced_logprobs(s2);
  ASSERT_EQ(lps.size(), 3u);
  EXPECT_EQ(lps[0], std::log(0.6));
  EXPECT_EQ(lps[1], std::log(0.3));
  EXPECT_EQ(lps[2], std::log(0.1));

  s2.continuation.clear();
  s2.terminated = false;
  EXPECT_THROW(t->teacher_forced_logprobs(s2), Error);
}

TEST(TeacherForced, TokenOutsideSupportIsNegativeInfinity) {
  TableLM lm("z", char_vocab("ab"), {0.5, 0.0, 0.5});
  auto seq = lm.encode_source("a");
  seq.continuation = make_tokens({1});
  EXPECT_EQ(lm.teacher_forced_logprobs(seq)[0], kNegInf);
  EXPECT_EQ(lm.token_logprob(lm.encode_source("a"), make_token(1)), kNegInf);
}

TEST(SampleRollout, PaperTemperatureTerminates) {
  const auto lm = abc_table();
  const auto out = lm->sample_rollout(lm->encode_source("AB"), 0.95, kDefaultMaxLen, 11);
  EXPECT_TRUE(out.terminated);
  EXPECT_EQ(out.continuation.back(), lm->eos());
}

TEST(SampleRollout, ForcedEosAppendsExactlyOne) {
  TableLM lm("eos", char_vocab("ab"), {0.0, 0.0, 1.0});
  const auto in = lm.encode_source("ab");
  const auto out = lm.sample_rollout(in, 0.95, 10, 3);
  EXPECT_TRUE(out.terminated);
  EXPECT_EQ(out.prompt, in.prompt);
  EXPECT_EQ(out.continuation, std::vector<TokenId>{lm.eos()});
}

TEST(SampleRollout, LengthCapLeavesSequenceOpen) {
  TableLM lm("noeos", char_vocab("ab"), {0.5, 0.5, 0.0});
  auto in = lm.encode_source("a");
  in.continuation = make_tokens({0, 1});
  const auto out = lm.sample_rollout(in, 1.0, 7, 5);
  EXPECT_FALSE(out.terminated);
  EXPECT_EQ(out.continuation.size(), 7u);
  EXPECT_TRUE(std::equal(in.continuation.begin(), in.continuation.end(), out.continuation.begin()));
}

TEST(SampleRollout, FirstStepFrequenciesMatchTemperedTable) {
  // p^(1/T) / sum p^(1/T), computed independently of the sampler.
  const auto lm = abc_table();
  const double t = 0.95;
  const double w[] = {std::pow(0.6, 1 / t), std::pow(0.3, 1 / t), std::pow(0.1, 1 / t)};
  const double z = w[0] + w[1] + w[2];
  std::array<int, 3> counts{};
  const int n = 40000;
  const auto start = lm->encode_source("A");
  for (int i = 0; i < n; ++i) ++counts[index_of(lm->sample_rollout(start, t, 1, derive_seed(99, {std::uint64_t(i)})).continuation[0])];
  for (int k = 0; k < 3; ++k) {
    const double p = w[k] / z;
    const double sd = std::sqrt(p * (1 - p) / n);
    EXPECT_NEAR(counts[k] / double(n), p, 5 * sd) << "token " << k;
  }
}

TEST(Scorers, ExactMatchAndEditSimilarity) {
  ExactMatchScorer exact(ReferenceMap{{"src", "hello"}});
  EXPECT_EQ(exact.score("src", "hello").value(), 1.0);
  EXPECT_EQ(exact.score("src", "hellO").value(), 0.0);
  EXPECT_THROW(exact.score("src", ""), Error);
  EXPECT_THROW(exact.score("other", "x"), Error);

  EditSimilarityScorer edit(ReferenceMap{{"s", "kitten"}});
  // d = 3, L = 6, |hyp| = 7.
  EXPECT_DOUBLE_EQ(edit.score("s", "sitting").value(), 1.0 - 3.0 / 7.0);
  EXPECT_DOUBLE_EQ(edit.score("s", "kit").value(), 1.0 - 3.0 / 6.0);
  EXPECT_EQ(edit.score("s", "kitten").value(), 1.0);
  EXPECT_EQ(edit.score("s", "sitting"), edit.score("s", "sitting"));
}

TEST(Detokenize, CharacterTokensAndRoundTrip) {
  auto lm = TableLM::uniform("hi", char_vocab("hi"));
  auto seq = lm->encode_source("ih");
  seq.continuation = make_tokens({0, 1});
  const auto text = detokenize_sequence(*lm, seq);
  EXPECT_EQ(text.source, "ih");
  EXPECT_EQ(text.hypothesis, "hi");

  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto r = lm->sample_rollout(lm->encode_source("hi"), 1.0, 12, s);
    auto body = r.continuation;
    if (r.terminated) body.pop_back();
    EXPECT_EQ(lm->tokenize(lm->detokenize(body)), body);
  }

  seq.continuation = make_tokens({7});
  EXPECT_THROW(detokenize_sequence(*lm, seq), Error);
}

TEST(Vocabulary, LongestMatchAndUnknownText) {
  Vocabulary v({"a", "ab", "b", "</s>"}, "</s>");
  EXPECT_EQ(v.tokenize("abab"), make_tokens({1, 1}));
  EXPECT_EQ(v.tokenize("aab"), make_tokens({0, 1}));
  EXPECT_THROW(v.tokenize("c"), Error);
  EXPECT_THROW(v.tokenize("</s>"), Error);
  EXPECT_THROW(Vocabulary({"a"}, "</s>"), Error);
}

TEST(Provider, TagMismatchIsTokenizerMismatch) {
  const auto lm = abc_table();
  auto seq = lm->encode_source("A");
  seq.provider_tag = "other";
  try {
    lm->next_token_logits(seq, TopK::all());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTokenizerMismatch);
  }
}

// Properties over random tables.

TEST(ProviderProperties, OrderingNormalizationAndCrossCheck) {
  std::mt19937_64 rng(2024);
  auto vocab = char_vocab("abcdef");
  for (int trial = 0; trial < 200; ++trial) {
    auto lm = testing::random_ngram("p", vocab, rng, 0.2);
    auto seq = lm->sample_rollout(lm->encode_source("abc"), 1.0, 8, static_cast<std::uint64_t>(trial));

    auto prefix = seq;
    prefix.continuation.clear();
    prefix.terminated = false;
    const auto tf = lm->teacher_forced_logprobs(seq);
    for (std::size_t i = 0; i < seq.continuation.size(); ++i) {
      const auto r = lm->next_token_logits(prefix, TopK::all());
      double mass = 0.0;
      for (std::size_t j = 0; j < r.candidates.size(); ++j) {
        mass += std::exp(r.candidates[j].logprob);
        EXPECT_LE(r.candidates[j].logprob, 0.0);
        if (j > 0) {
          const auto& a = r.candidates[j - 1];
          const auto& b = r.candidates[j];
          EXPECT_TRUE(a.logit > b.logit || (a.logit == b.logit && index_of(a.token) < index_of(b.token)));
        }
      }
      EXPECT_NEAR(mass, 1.0, 1e-6);
      EXPECT_EQ(tf[i], lm->token_logprob(prefix, seq.continuation[i]));
      prefix.continuation.push_back(seq.continuation[i]);
    }
  }
}

TEST(ProviderProperties, RolloutsAreBitIdenticalPerSeed) {
  std::mt19937_64 rng(5);
  auto lm = testing::random_ngram("p", char_vocab("abcd"), rng, 0.1);
  const auto start = lm->encode_source("ab");
  for (std::uint64_t s = 0; s < 100; ++s) {
    EXPECT_EQ(lm->sample_rollout(start, 0.95, 40, s), lm->sample_rollout(start, 0.95, 40, s));
  }
}

TEST(ToyIo, LoadsEveryModelType) {
  using nlohmann::json;
  const json table = {{"tag", "t"}, {"eos", "</s>"}, {"vocab", {"A", "B", "</s>"}}, {"type", "table"},
                      {"probs", {{"A", 0.6}, {"B", 0.3}, {"</s>", 0.1}}}};
  auto lm = toy::load_language_model(table);
  const auto r = lm->next_token_logits(lm->encode_source("A"), TopK::of(1));
  EXPECT_EQ(r.candidates[0].logprob, std::log(0.6));

  const json ngram = {{"tag", "n"}, {"eos", "</s>"}, {"vocab", {"a", "b", "</s>"}}, {"type", "ngram"},
                      {"rows", {{"a", {{"b", 1.0}}}}},
                      {"fallback", {{"a", 0.5}, {"</s>", 0.5}}}};
  auto ng = toy::load_language_model(ngram);
  EXPECT_EQ(ng->next_token_logits(ng->encode_source("a"), TopK::all()).candidates.size(), 1u);
  EXPECT_EQ(ng->next_token_logits(ng->encode_source("b"), TopK::all()).candidates.size(), 2u);

  const json ctx = {{"tag", "c"}, {"eos", "</s>"}, {"vocab", {"a", "b", "</s>"}}, {"type", "context"},
                    {"rows", {{"", {{"b", 1.0}}}, {"b", {{"</s>", 1.0}}}}},
                    {"fallback", {{"a", 1.0}}}};
  auto c = toy::load_language_model(ctx);
  const auto out = c->sample_rollout(c->encode_source("a"), 1.0, 5, 0);
  EXPECT_EQ(c->detokenize(out.continuation), "b");
  EXPECT_TRUE(out.terminated);

  EXPECT_EQ(toy::load_language_model({{"tag", "u"}, {"eos", "e"}, {"vocab", {"x", "e"}}, {"type", "uniform"}})
                ->vocab_size(),
            2u);
}

TEST(ToyIo, RejectsBadDocuments) {
  using nlohmann::json;
  auto code_of = [](const json& doc) {
    try {
      toy::load_language_model(doc);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kIoError;
  };
  EXPECT_EQ(code_of({{"tag", "t"}, {"eos", "</s>"}, {"vocab", {"A", "</s>"}}, {"type", "table"},
                     {"probs", {{"A", 0.6}, {"</s>", 0.3}}}}),
            ErrorCode::kConfigError);
  EXPECT_EQ(code_of({{"tag", "t"}, {"eos", "</s>"}, {"vocab", {"A", "</s>"}}, {"type", "table"},
                     {"probs", {{"Q", 1.0}}}}),
            ErrorCode::kConfigError);
  EXPECT_EQ(code_of({{"tag", "t"}, {"eos", "</s>"}, {"vocab", {"A", "</s>"}}, {"type", "magic"}}),
            ErrorCode::kConfigError);
  EXPECT_EQ(code_of({{"eos", "</s>"}, {"vocab", {"A", "</s>"}}, {"type", "uniform"}}), ErrorCode::kConfigError);

  auto scorer = toy::load_scorer({{"type", "edit_similarity"}, {"references", {{"x", "abc"}}}});
  EXPECT_DOUBLE_EQ(scorer->score("x", "abd").value(), 1.0 - 1.0 / 3.0);
}

}  // namespace
}  // namespace tprm
