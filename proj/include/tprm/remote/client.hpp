// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#pragma once

/**
 * Clients for a remote inference sidecar speaking protocol "rt/1".
 *
 * RemoteLM and RemoteScorer implement the local provider interfaces, so any
 * module can run against a served model unchanged. All operations are pure
 * queries: retries resend the identical body and never duplicate effects.
 *
 * Retry policy: transport failures and HTTP 503 are retried up to
 * Endpoint::max_retries times, sleeping backoff_initial * factor^attempt with
 * +-20% jitter. Jitter comes from a seeded generator; it never affects results.
 */

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "tprm/core/error.hpp"
#include "tprm/core/rng.hpp"
#include "tprm/core/types.hpp"
#include "tprm/providers/language_model.hpp"
#include "tprm/providers/scorer.hpp"
#include "tprm/remote/wire.hpp"

namespace tprm::remote {

struct Endpoint {
  std::string base_url;  // e.g. "http://127.0.0.1:8080"
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;
  std::optional<std::string> auth_token;
  std::chrono::milliseconds backoff_initial{200};
  double backoff_factor = 2.0;
  double backoff_jitter = 0.2;
  std::size_t batch_size = 8;      // rollouts per request
  std::size_t max_in_flight = 8;   // connection ceiling per transport

  void validate() const {
    require(!base_url.empty(), "endpoint base_url must be set");
    require(timeout.count() > 0, "endpoint timeout must be positive");
    require(max_retries >= 0, "endpoint max_retries must be >= 0");
    require(batch_size > 0, "endpoint batch_size must be positive");
    require(max_in_flight > 0, "endpoint max_in_flight must be positive");
  }
};

/// HTTP POST with retry, bounded concurrency and error mapping.
class Transport {
 public:
  explicit Transport(Endpoint endpoint, ErrorCode unavailable = ErrorCode::kProviderUnavailable)
      : endpoint_(std::move(endpoint)),
        unavailable_(unavailable),
        slots_(static_cast<std::ptrdiff_t>(std::min<std::size_t>(endpoint_.max_in_flight, 1024))) {
    endpoint_.validate();
  }

  const Endpoint& endpoint() const noexcept { return endpoint_; }

  /// Number of HTTP attempts issued so far (for diagnostics and tests).
  std::size_t attempts() const noexcept { return attempts_.load(); }

  json post(const char* path, const json& body) const {
    const std::string payload = body.dump();
    std::string last_failure = "no attempt made";
    for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(backoff(attempt - 1));
      auto outcome = send(path, payload);
      if (outcome.retryable) {
        last_failure = std::move(outcome.failure);
        continue;
      }
      return std::move(outcome.body);
    }
    throw Error(unavailable_, endpoint_.base_url + path + " unavailable after " +
                                  std::to_string(endpoint_.max_retries + 1) + " attempts: " + last_failure);
  }

 private:
  struct Outcome {
    bool retryable = false;
    std::string failure;
    json body;
  };

  Outcome send(const char* path, const std::string& payload) const {
    slots_.acquire();
    struct Release {
      std::counting_semaphore<1024>& s;
      ~Release() { s.release(); }
    } release{slots_};
    ++attempts_;

    httplib::Client cli(endpoint_.base_url);
    const auto ms = endpoint_.timeout.count();
    cli.set_connection_timeout(ms / 1000, (ms % 1000) * 1000);
    cli.set_read_timeout(ms / 1000, (ms % 1000) * 1000);
    cli.set_write_timeout(ms / 1000, (ms % 1000) * 1000);
    httplib::Headers headers;
    if (endpoint_.auth_token) headers.emplace("Authorization", "Bearer " + *endpoint_.auth_token);

    auto res = cli.Post(path, headers, payload, "application/json");
    if (!res) return {true, "transport error: " + httplib::to_string(res.error()), {}};
    if (res->status == 503) return {true, "HTTP 503", {}};

    json body;
    try {
      body = json::parse(res->body);
    } catch (const json::exception&) {
      protocol_error(std::string("unparseable response body from ") + path);
    }
    if (res->status != 200) raise_remote_error(res->status, body);
    check_version(body);
    return {false, {}, std::move(body)};
  }

  [[noreturn]] void raise_remote_error(int status, const json& body) const {
    std::string message = "HTTP " + std::to_string(status);
    std::optional<ErrorCode> code;
    if (body.is_object() && body.contains("error") && body.at("error").is_object()) {
      const auto& err = body.at("error");
      if (err.contains("message") && err.at("message").is_string()) message += ": " + err.at("message").get<std::string>();
      if (err.contains("code") && err.at("code").is_string()) code = error_code_from_string(err.at("code").get<std::string>());
    }
    if (status >= 500) throw Error(ErrorCode::kRemoteModelError, message);
    if (code && (*code == ErrorCode::kUnknownToken || *code == ErrorCode::kTokenizerMismatch ||
                 *code == ErrorCode::kProtocolMismatch || *code == ErrorCode::kInvalidArgument ||
                 *code == ErrorCode::kDegenerateDistribution || *code == ErrorCode::kScorerUnavailable)) {
      throw Error(*code, message);
    }
    throw Error(ErrorCode::kRemoteModelError, message);
  }

  std::chrono::milliseconds backoff(int retry_index) const {
    double base = static_cast<double>(endpoint_.backoff_initial.count());
    for (int i = 0; i < retry_index; ++i) base *= endpoint_.backoff_factor;
    double u;
    {
      std::lock_guard lock(jitter_mu_);
      u = jitter_.next_double();
    }
    const double factor = 1.0 + endpoint_.backoff_jitter * (2.0 * u - 1.0);
    return std::chrono::milliseconds(static_cast<std::int64_t>(base * factor));
  }

  Endpoint endpoint_;
  ErrorCode unavailable_;
  mutable std::counting_semaphore<1024> slots_;
  mutable std::atomic<std::size_t> attempts_{0};
  mutable std::mutex jitter_mu_;
  mutable SplitMix64 jitter_{0x5eed};
};

namespace detail {
inline json sequence_body(const WireRequest& req) {
  json body = envelope();
  body["model"] = req.model;
  body["prompt"] = ids_to_json(req.prompt);
  body["continuation"] = ids_to_json(req.continuation);
  return body;
}

inline TokenSequence rollout_from_json(const json& r, const TokenSequence& base) {
  if (!r.is_object() || !r.contains("continuation") || !r.contains("terminated") || !r.at("terminated").is_boolean()) {
    protocol_error("malformed rollout entry");
  }
  TokenSequence out{base.provider_tag, base.prompt, ids_from_json(r.at("continuation"), "continuation"),
                    r.at("terminated").get<bool>()};
  if (out.continuation.size() < base.continuation.size() ||
      !std::equal(base.continuation.begin(), base.continuation.end(), out.continuation.begin())) {
    protocol_error("rollout does not extend the requested sequence");
  }
  return out;
}
}  // namespace detail

/// POST /v1/logits.
inline LogitsResult remote_logits(const Transport& transport, const WireRequest& req) {
  json body = detail::sequence_body(req);
  body["k"] = req.k ? json(*req.k) : json(nullptr);
  return logits_from_json(transport.post(path::kLogits, body));
}

/// POST /v1/rollout, split into batches of Endpoint::batch_size seeds and
/// reassembled in seed order.
inline std::vector<TokenSequence> batch_rollouts(const Transport& transport, const TokenSequence& seq,
                                                 std::size_t n, double temperature, std::size_t max_len,
                                                 std::span<const std::uint64_t> seeds) {
  require(n > 0, "rollout count must be positive");
  require(seeds.size() == n, "need exactly one seed per rollout");
  require(temperature > 0.0, "temperature must be positive");
  std::vector<TokenSequence> out;
  out.reserve(n);
  const auto batch = transport.endpoint().batch_size;
  for (std::size_t start = 0; start < n; start += batch) {
    const auto count = std::min(batch, n - start);
    json body = detail::sequence_body(WireRequest::for_sequence(seq));
    body["temperature"] = temperature;
    body["max_len"] = max_len;
    body["seeds"] = std::vector<std::uint64_t>(seeds.begin() + static_cast<std::ptrdiff_t>(start),
                                               seeds.begin() + static_cast<std::ptrdiff_t>(start + count));
    const auto resp = transport.post(path::kRollout, body);
    if (!resp.contains("rollouts") || !resp.at("rollouts").is_array() || resp.at("rollouts").size() != count) {
      protocol_error("rollout response size does not match the seeds sent");
    }
    for (const auto& r : resp.at("rollouts")) out.push_back(detail::rollout_from_json(r, seq));
  }
  return out;
}

inline std::vector<TokenSequence> batch_rollouts(const Endpoint& endpoint, const TokenSequence& seq, std::size_t n,
                                                 double temperature, std::size_t max_len,
                                                 std::span<const std::uint64_t> seeds) {
  return batch_rollouts(Transport(endpoint), seq, n, temperature, max_len, seeds);
}

/// POST /v1/score.
inline QualityScore remote_score(const Transport& transport, const std::string& scorer, std::string_view source,
                                 std::string_view hypothesis, std::string_view lang_pair) {
  json body = envelope();
  body["scorer"] = scorer;
  body["source"] = source;
  body["hypothesis"] = hypothesis;
  body["lang_pair"] = lang_pair;
  const auto resp = transport.post(path::kScore, body);
  if (!resp.contains("score") || !resp.at("score").is_number()) protocol_error("score response lacks 'score'");
  const double v = resp.at("score").get<double>();
  if (!(v >= 0.0 && v <= 1.0)) protocol_error("score outside [0, 1]");
  return QualityScore(v);
}

/// A served causal LM. Vocabulary size and EOS are fetched once at construction.
class RemoteLM final : public LanguageModel {
 public:
  RemoteLM(Endpoint endpoint, std::string model)
      : transport_(std::make_shared<Transport>(std::move(endpoint))), model_(std::move(model)) {
    json body = envelope();
    body["model"] = model_;
    const auto info = transport_->post(path::kInfo, body);
    if (!info.contains("vocab_size") || !info.contains("eos_id") || !info.at("vocab_size").is_number_unsigned() ||
        !info.at("eos_id").is_number_unsigned()) {
      protocol_error("info response lacks vocab_size/eos_id");
    }
    vocab_size_ = info.at("vocab_size").get<std::size_t>();
    eos_ = make_token(info.at("eos_id").get<std::uint32_t>());
  }

  const std::string& tag() const override { return model_; }
  std::size_t vocab_size() const override { return vocab_size_; }
  TokenId eos() const override { return eos_; }
  const Transport& transport() const { return *transport_; }

  LogitsResult next_token_logits(const TokenSequence& seq, TopK k) const override {
    require(!seq.terminated, "no next token after EOS");
    check_sequence(seq);
    auto req = WireRequest::for_sequence(seq);
    if (!k.is_all()) req.k = k.value();
    return remote_logits(*transport_, req);
  }

  std::vector<double> teacher_forced_logprobs(const TokenSequence& seq) const override {
    require(!seq.continuation.empty(), "teacher forcing needs a non-empty continuation");
    check_sequence(seq);
    const auto resp = transport_->post(path::kTeacherForced, detail::sequence_body(WireRequest::for_sequence(seq)));
    if (!resp.contains("logprobs")) protocol_error("teacher_forced response lacks 'logprobs'");
    auto lps = logprobs_from_json(resp.at("logprobs"));
    if (lps.size() != seq.continuation.size()) protocol_error("teacher_forced length mismatch");
    return lps;
  }

  double token_logprob(const TokenSequence& seq, TokenId token) const override {
    require(!seq.terminated, "no next token after EOS");
    TokenSequence ext = seq;
    ext.continuation.push_back(token);
    return teacher_forced_logprobs(ext).back();
  }

  TokenSequence sample_rollout(const TokenSequence& seq, double temperature, std::size_t max_len,
                               std::uint64_t seed) const override {
    require(!seq.terminated, "cannot roll out a terminated sequence");
    check_sequence(seq);
    const std::uint64_t seeds[] = {seed};
    return batch_rollouts(*transport_, seq, 1, temperature, max_len, seeds).front();
  }

  std::vector<TokenId> tokenize(std::string_view text) const override {
    json body = envelope();
    body["model"] = model_;
    body["text"] = text;
    const auto resp = transport_->post(path::kTokenize, body);
    if (!resp.contains("ids")) protocol_error("tokenize response lacks 'ids'");
    return ids_from_json(resp.at("ids"), "ids");
  }

  std::string detokenize(std::span<const TokenId> ids) const override {
    check_ids(ids);
    json body = envelope();
    body["model"] = model_;
    body["ids"] = ids_to_json({ids.begin(), ids.end()});
    const auto resp = transport_->post(path::kDetokenize, body);
    if (!resp.contains("text") || !resp.at("text").is_string()) protocol_error("detokenize response lacks 'text'");
    return resp.at("text").get<std::string>();
  }

 private:
  std::shared_ptr<Transport> transport_;
  std::string model_;
  std::size_t vocab_size_ = 0;
  TokenId eos_{};
};

/// A served quality-estimation model.
class RemoteScorer final : public QualityScorer {
 public:
  RemoteScorer(Endpoint endpoint, std::string scorer, std::string default_lang_pair = {})
      : transport_(std::make_shared<Transport>(std::move(endpoint), ErrorCode::kScorerUnavailable)),
        scorer_(std::move(scorer)),
        default_lang_pair_(std::move(default_lang_pair)) {}

  const Transport& transport() const { return *transport_; }

 protected:
  QualityScore do_score(std::string_view source, std::string_view hypothesis,
                        std::string_view lang_pair) const override {
    return remote_score(*transport_, scorer_, source, hypothesis,
                        lang_pair.empty() ? std::string_view(default_lang_pair_) : lang_pair);
  }

 private:
  std::shared_ptr<Transport> transport_;
  std::string scorer_;
  std::string default_lang_pair_;
};

}  // namespace tprm::remote
