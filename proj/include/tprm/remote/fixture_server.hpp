// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#pragma once

// In-process "rt/1" server that exposes local providers over HTTP. It is the
// reference implementation of the protocol and the conformance fixture for
// the remote clients; `tprm serve` wraps it.

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "tprm/core/error.hpp"
#include "tprm/providers/language_model.hpp"
#include "tprm/providers/scorer.hpp"
#include "tprm/remote/wire.hpp"

namespace tprm::remote {

/// Fault injection knobs for client tests.
struct FixtureOptions {
  std::string protocol_version{kProtocolVersion};
  std::size_t unavailable_first = 0;  // answer 503 to this many requests first
  bool malformed_bodies = false;      // answer 200 with a non-JSON body
};

class FixtureServer {
 public:
  explicit FixtureServer(FixtureOptions options = {}) : options_(std::move(options)) {}
  ~FixtureServer() { stop(); }

  FixtureServer(const FixtureServer&) = delete;
  FixtureServer& operator=(const FixtureServer&) = delete;

  void add_model(std::shared_ptr<const LanguageModel> lm) { models_[lm->tag()] = std::move(lm); }
  bool has_model(const std::string& tag) const { return models_.count(tag) != 0; }
  void add_scorer(std::string tag, std::shared_ptr<const QualityScorer> scorer) {
    scorers_[std::move(tag)] = std::move(scorer);
  }

  /// Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    install_routes();
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw Error(ErrorCode::kIoError, "cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  /// Serves on the calling thread until stop() is called elsewhere.
  void run(const std::string& host, int port) {
    install_routes();
    if (!server_.bind_to_port(host, port)) throw Error(ErrorCode::kIoError, "cannot bind " + host + ":" + std::to_string(port));
    port_ = port;
    server_.listen_after_bind();
  }

  void stop() {
    if (server_.is_running()) server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const noexcept { return port_; }
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::size_t requests() const noexcept { return requests_.load(); }
  json last_request() const {
    std::lock_guard lock(mu_);
    return last_request_;
  }

 private:
  using Handler = std::function<json(const json&)>;

  void install_routes() {
    if (routes_installed_) return;
    routes_installed_ = true;
    route(path::kInfo, [this](const json& req) {
      const auto& lm = model(req);
      json out = envelope();
      out["model"] = lm.tag();
      out["vocab_size"] = lm.vocab_size();
      out["eos_id"] = index_of(lm.eos());
      return out;
    });
    route(path::kTokenize, [this](const json& req) {
      json out = envelope();
      out["ids"] = ids_to_json(model(req).tokenize(req.at("text").get<std::string>()));
      return out;
    });
    route(path::kDetokenize, [this](const json& req) {
      const auto& lm = model(req);
      const auto ids = ids_from_json(req.at("ids"), "ids");
      lm.check_ids(ids);
      json out = envelope();
      out["text"] = lm.detokenize(ids);
      return out;
    });
    route(path::kLogits, [this](const json& req) {
      const auto& lm = model(req);
      const auto& k = req.at("k");
      return logits_to_json(lm.next_token_logits(sequence(req), k.is_null() ? TopK::all() : TopK::of(k.get<std::size_t>())));
    });
    route(path::kTeacherForced, [this](const json& req) {
      json out = envelope();
      out["logprobs"] = logprobs_to_json(model(req).teacher_forced_logprobs(sequence(req)));
      return out;
    });
    route(path::kRollout, [this](const json& req) {
      const auto& lm = model(req);
      const auto seq = sequence(req);
      const double temperature = req.at("temperature").get<double>();
      const auto max_len = req.at("max_len").get<std::size_t>();
      json rollouts = json::array();
      for (const auto& s : req.at("seeds")) {
        auto r = lm.sample_rollout(seq, temperature, max_len, s.get<std::uint64_t>());
        rollouts.push_back({{"continuation", ids_to_json(r.continuation)}, {"terminated", r.terminated}});
      }
      json out = envelope();
      out["rollouts"] = std::move(rollouts);
      return out;
    });
    route(path::kScore, [this](const json& req) {
      const auto tag = req.at("scorer").get<std::string>();
      auto it = scorers_.find(tag);
      if (it == scorers_.end()) throw Error(ErrorCode::kScorerUnavailable, "unknown scorer '" + tag + "'");
      json out = envelope();
      out["score"] = it->second
                         ->score(req.at("source").get<std::string>(), req.at("hypothesis").get<std::string>(),
                                 req.at("lang_pair").get<std::string>())
                         .value();
      return out;
    });
  }

  void route(const char* p, Handler handler) {
    server_.Post(p, [this, handler = std::move(handler)](const httplib::Request& http_req, httplib::Response& res) {
      const auto n = requests_.fetch_add(1);
      if (n < options_.unavailable_first) {
        res.status = 503;
        res.set_content(error_body(ErrorCode::kProviderUnavailable, "loading").dump(), "application/json");
        return;
      }
      if (options_.malformed_bodies) {
        res.status = 200;
        res.set_content("{not json", "application/json");
        return;
      }
      try {
        const auto req = json::parse(http_req.body);
        {
          std::lock_guard lock(mu_);
          last_request_ = req;
        }
        if (!req.contains("protocol_version") || req.at("protocol_version") != kProtocolVersion) {
          throw Error(ErrorCode::kProtocolMismatch, "unsupported protocol_version");
        }
        auto body = handler(req);
        body["protocol_version"] = options_.protocol_version;
        res.status = 200;
        res.set_content(body.dump(), "application/json");
      } catch (const Error& e) {
        res.status = status_for(e.code());
        res.set_content(error_body(e.code(), e.what()).dump(), "application/json");
      } catch (const std::exception& e) {
        res.status = 400;
        res.set_content(error_body(ErrorCode::kInvalidArgument, e.what()).dump(), "application/json");
      }
    });
  }

  static int status_for(ErrorCode code) {
    switch (code) {
      case ErrorCode::kInvalidArgument:
      case ErrorCode::kUnknownToken:
      case ErrorCode::kTokenizerMismatch:
      case ErrorCode::kProtocolMismatch:
      case ErrorCode::kDegenerateDistribution:
      case ErrorCode::kScorerUnavailable:
        return 400;
      default:
        return 500;
    }
  }

  const LanguageModel& model(const json& req) const {
    const auto tag = req.at("model").get<std::string>();
    auto it = models_.find(tag);
    if (it == models_.end()) throw Error(ErrorCode::kTokenizerMismatch, "unknown model '" + tag + "'");
    return *it->second;
  }

  TokenSequence sequence(const json& req) const {
    const auto& lm = model(req);
    TokenSequence seq{lm.tag(), ids_from_json(req.at("prompt"), "prompt"),
                      ids_from_json(req.at("continuation"), "continuation"), false};
    seq.terminated = !seq.continuation.empty() && seq.continuation.back() == lm.eos();
    return seq;
  }

  FixtureOptions options_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
  bool routes_installed_ = false;
  std::atomic<std::size_t> requests_{0};
  mutable std::mutex mu_;
  json last_request_;
  std::map<std::string, std::shared_ptr<const LanguageModel>> models_;
  std::map<std::string, std::shared_ptr<const QualityScorer>> scorers_;
};

}  // namespace tprm::remote
