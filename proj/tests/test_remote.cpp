// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "tprm/core/parallel.hpp"
#include "tprm/remote/client.hpp"
#include "tprm/remote/fixture_server.hpp"

namespace tprm::remote {
namespace {

using testing::char_vocab;

Endpoint fast_endpoint(const std::string& url, int retries = 2) {
  Endpoint e;
  e.base_url = url;
  e.timeout = std::chrono::milliseconds(2000);
  e.max_retries = retries;
  e.backoff_initial = std::chrono::milliseconds(1);
  return e;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kIoError;
}

class RemoteFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    auto vocab = std::make_shared<const Vocabulary>(std::vector<std::string>{"A", "B", "</s>"}, "</s>");
    table_ = std::make_shared<TableLM>("abc", vocab, std::vector<double>{0.6, 0.3, 0.1});
    std::mt19937_64 rng(17);
    ngram_ = testing::random_ngram("ngram", char_vocab("abcde"), rng, 0.15);
    server_.add_model(table_);
    server_.add_model(ngram_);
    server_.add_scorer("echo", std::make_shared<ExactMatchScorer>(ReferenceMap{{"src", "hello"}}));
    server_.start();
  }

  std::shared_ptr<TableLM> table_;
  std::shared_ptr<NGramLM> ngram_;
  FixtureServer server_;
};

TEST_F(RemoteFixture, LogitsMatchLocalTable) {
  RemoteLM remote(fast_endpoint(server_.base_url()), "abc");
  EXPECT_EQ(remote.vocab_size(), 3u);
  EXPECT_EQ(remote.eos(), table_->eos());
  const auto seq = table_->encode_source("AB");
  const auto r = remote.next_token_logits(seq, TopK::of(2));
  const auto l = table_->next_token_logits(seq, TopK::of(2));
  ASSERT_EQ(r.candidates.size(), 2u);
  EXPECT_EQ(r.candidates, l.candidates);
  EXPECT_EQ(r.complete, l.complete);
}

TEST_F(RemoteFixture, EveryOperationConformsToLocalModel) {
  const LanguageModel& local = *ngram_;
  RemoteLM remote(fast_endpoint(server_.base_url()), "ngram");
  EXPECT_EQ(remote.tokenize("abcab"), local.tokenize("abcab"));
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto start = local.encode_source("abc");
    const auto lr = local.sample_rollout(start, 0.95, 10, s);
    const auto rr = remote.sample_rollout(start, 0.95, 10, s);
    EXPECT_EQ(rr, lr);
    EXPECT_EQ(remote.detokenize(rr.continuation), local.detokenize(lr.continuation));
    const auto ltf = local.teacher_forced_logprobs(lr);
    const auto rtf = remote.teacher_forced_logprobs(lr);
    ASSERT_EQ(rtf.size(), ltf.size());
    for (std::size_t i = 0; i < ltf.size(); ++i) EXPECT_NEAR(rtf[i], ltf[i], 1e-6);

    auto prefix = lr.truncated(lr.continuation.size() / 2, local.eos());
    if (prefix.terminated) continue;
    const auto la = local.next_token_logits(prefix, TopK::all());
    const auto ra = remote.next_token_logits(prefix, TopK::all());
    ASSERT_EQ(ra.candidates.size(), la.candidates.size());
    for (std::size_t i = 0; i < la.candidates.size(); ++i) {
      EXPECT_EQ(ra.candidates[i].token, la.candidates[i].token);
      EXPECT_NEAR(ra.candidates[i].logprob, la.candidates[i].logprob, 1e-6);
    }
    EXPECT_NEAR(remote.token_logprob(prefix, make_token(0)), local.token_logprob(prefix, make_token(0)), 1e-6);
  }
}

TEST_F(RemoteFixture, NegativeInfinityTravelsAsNull) {
  auto vocab = char_vocab("ab");
  server_.stop();
  FixtureServer server;
  auto sparse = std::make_shared<TableLM>("sparse", vocab, std::vector<double>{0.5, 0.0, 0.5});
  server.add_model(sparse);
  server.start();
  RemoteLM remote(fast_endpoint(server.base_url()), "sparse");
  auto seq = sparse->encode_source("a");
  seq.continuation = make_tokens({1});
  EXPECT_EQ(remote.teacher_forced_logprobs(seq)[0], kNegInf);
  EXPECT_EQ(server.last_request().at("continuation"), json::array({1}));
}

TEST_F(RemoteFixture, BatchRolloutsSplitAndKeepSeedOrder) {
  auto endpoint = fast_endpoint(server_.base_url());
  endpoint.batch_size = 2;
  Transport transport(endpoint);
  const auto start = ngram_->encode_source("ab");
  const std::vector<std::uint64_t> seeds{5, 9, 1, 44, 3};
  const auto before = transport.attempts();
  const auto out = batch_rollouts(transport, start, seeds.size(), 0.95, 12, seeds);
  EXPECT_EQ(transport.attempts() - before, 3u);  // 2 + 2 + 1
  ASSERT_EQ(out.size(), seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) EXPECT_EQ(out[i], ngram_->sample_rollout(start, 0.95, 12, seeds[i]));
}

TEST_F(RemoteFixture, RolloutCountsAndSeedValidation) {
  const auto endpoint = fast_endpoint(server_.base_url());
  const auto start = table_->encode_source("A");
  const std::vector<std::uint64_t> three{1, 2, 3};
  EXPECT_EQ(batch_rollouts(endpoint, start, 3, 0.95, 20, three).size(), 3u);
  const std::vector<std::uint64_t> one{77};
  EXPECT_EQ(batch_rollouts(endpoint, start, 1, 0.95, 20, one), batch_rollouts(endpoint, start, 1, 0.95, 20, one));
  EXPECT_EQ(code_of([&] { batch_rollouts(endpoint, start, 3, 0.95, 20, one); }), ErrorCode::kInvalidArgument);
}

TEST_F(RemoteFixture, ScoreForwardsLangPairVerbatim) {
  RemoteScorer scorer(fast_endpoint(server_.base_url()), "echo");
  EXPECT_EQ(scorer.score("src", "hello", "zh-en").value(), 1.0);
  EXPECT_EQ(server_.last_request().at("lang_pair"), "zh-en");
  EXPECT_EQ(scorer.score("src", "nope", "de-en").value(), 0.0);
  EXPECT_EQ(code_of([&] { scorer.score("unknown source", "x", "zh-en"); }), ErrorCode::kScorerUnavailable);
  RemoteScorer missing(fast_endpoint(server_.base_url()), "no-such-scorer");
  EXPECT_EQ(code_of([&] { missing.score("src", "x"); }), ErrorCode::kScorerUnavailable);
}

TEST_F(RemoteFixture, ServerSideValidationMapsToErrorCodes) {
  RemoteLM remote(fast_endpoint(server_.base_url()), "abc");
  auto seq = table_->encode_source("A");
  seq.continuation = make_tokens({0});
  EXPECT_EQ(code_of([&] { RemoteLM(fast_endpoint(server_.base_url()), "nope"); }), ErrorCode::kTokenizerMismatch);
  // Locally validated before any request.
  seq.continuation = make_tokens({9});
  EXPECT_EQ(code_of([&] { remote.teacher_forced_logprobs(seq); }), ErrorCode::kUnknownToken);
  // Server-side validation: an id the server rejects.
  Transport t(fast_endpoint(server_.base_url()));
  json body = envelope();
  body["model"] = "abc";
  body["prompt"] = json::array({0});
  body["continuation"] = json::array({9});
  EXPECT_EQ(code_of([&] { t.post(path::kTeacherForced, body); }), ErrorCode::kUnknownToken);
  body["protocol_version"] = "rt/0";
  EXPECT_EQ(code_of([&] { t.post(path::kTeacherForced, body); }), ErrorCode::kProtocolMismatch);
}

TEST(RemoteFailures, ResponseVersionMismatch) {
  FixtureServer server(FixtureOptions{"rt/2", 0, false});
  server.add_model(TableLM::uniform("u", char_vocab("ab")));
  server.start();
  EXPECT_EQ(code_of([&] { RemoteLM(fast_endpoint(server.base_url()), "u"); }), ErrorCode::kProtocolMismatch);
}

TEST(RemoteFailures, MalformedBody) {
  FixtureServer server(FixtureOptions{std::string(kProtocolVersion), 0, true});
  server.add_scorer("echo", std::make_shared<ConstantScorer>(1.0));
  server.start();
  RemoteScorer scorer(fast_endpoint(server.base_url()), "echo");
  EXPECT_EQ(code_of([&] { scorer.score("a", "b", "zh-en"); }), ErrorCode::kProtocolMismatch);
}

TEST(RemoteFailures, DownEndpointExhaustsRetries) {
  // Nothing listens on port 1; connections are refused at once.
  const int port = 1;
  const auto url = "http://127.0.0.1:" + std::to_string(port);
  Transport transport(fast_endpoint(url, 3));
  WireRequest req;
  req.model = "m";
  req.prompt = make_tokens({0});
  EXPECT_EQ(code_of([&] { remote_logits(transport, req); }), ErrorCode::kProviderUnavailable);
  EXPECT_EQ(transport.attempts(), 4u);

  Transport scorer_transport(fast_endpoint(url, 1), ErrorCode::kScorerUnavailable);
  EXPECT_EQ(code_of([&] { remote_score(scorer_transport, "s", "a", "b", "zh-en"); }), ErrorCode::kScorerUnavailable);
  EXPECT_EQ(scorer_transport.attempts(), 2u);
}

TEST(RemoteFailures, TransientUnavailabilityIsRetried) {
  FixtureServer server(FixtureOptions{std::string(kProtocolVersion), 2, false});
  server.add_scorer("c", std::make_shared<ConstantScorer>(0.25));
  server.start();
  RemoteScorer scorer(fast_endpoint(server.base_url(), 2), "c");
  EXPECT_EQ(scorer.score("a", "b").value(), 0.25);
  EXPECT_EQ(scorer.transport().attempts(), 3u);
}

TEST(RemoteFailures, EndpointValidation) {
  Endpoint e;
  EXPECT_THROW(e.validate(), Error);
  e.base_url = "http://x";
  e.timeout = std::chrono::milliseconds(0);
  EXPECT_THROW(e.validate(), Error);
  e.timeout = std::chrono::milliseconds(1);
  e.max_retries = -1;
  EXPECT_THROW(e.validate(), Error);
}

TEST_F(RemoteFixture, ConcurrentClientsAgree) {
  auto endpoint = fast_endpoint(server_.base_url());
  endpoint.max_in_flight = 2;
  RemoteLM remote(endpoint, "ngram");
  const auto start = ngram_->encode_source("abc");
  std::vector<TokenSequence> out(16);
  tprm::parallel_for(out.size(), 4, [&](std::size_t i) { out[i] = remote.sample_rollout(start, 0.95, 10, i); });
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], ngram_->sample_rollout(start, 0.95, 10, i));
}

}  // namespace
}  // namespace tprm::remote
