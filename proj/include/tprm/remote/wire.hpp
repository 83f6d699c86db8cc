// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#pragma once

// Wire protocol "rt/1": JSON bodies over HTTP POST. Field-by-field reference
// in docs/wire_protocol.md. Shared by the client and the fixture server.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tprm/core/error.hpp"
#include "tprm/core/types.hpp"

namespace tprm::remote {

using nlohmann::json;

inline constexpr std::string_view kProtocolVersion = "rt/1";

namespace path {
inline constexpr const char* kInfo = "/v1/info";
inline constexpr const char* kTokenize = "/v1/tokenize";
inline constexpr const char* kDetokenize = "/v1/detokenize";
inline constexpr const char* kLogits = "/v1/logits";
inline constexpr const char* kTeacherForced = "/v1/teacher_forced";
inline constexpr const char* kRollout = "/v1/rollout";
inline constexpr const char* kScore = "/v1/score";
}  // namespace path

/// One request body. Only the fields relevant to the target path are sent.
struct WireRequest {
  std::string model;
  std::vector<TokenId> prompt;
  std::vector<TokenId> continuation;
  std::optional<std::size_t> k;  // nullopt = whole support
  double temperature = 1.0;
  std::size_t max_len = 0;
  std::vector<std::uint64_t> seeds;
  std::string text;

  static WireRequest for_sequence(const TokenSequence& seq) {
    WireRequest r;
    r.model = seq.provider_tag;
    r.prompt = seq.prompt;
    r.continuation = seq.continuation;
    return r;
  }
};

[[noreturn]] inline void protocol_error(const std::string& what) {
  throw Error(ErrorCode::kProtocolMismatch, what);
}

inline json envelope() { return json{{"protocol_version", kProtocolVersion}}; }

inline json ids_to_json(const std::vector<TokenId>& ids) { return token_indices(ids); }

inline std::vector<TokenId> ids_from_json(const json& j, const char* field) {
  if (!j.is_array()) protocol_error(std::string("'") + field + "' must be an array of token ids");
  std::vector<TokenId> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      protocol_error(std::string("'") + field + "' holds a non-id value");
    }
    out.push_back(make_token(v.get<std::uint32_t>()));
  }
  return out;
}

/// Logprobs travel as numbers; -inf (outside the support) travels as null.
inline json logprobs_to_json(const std::vector<double>& lps) {
  json out = json::array();
  for (double lp : lps) out.push_back(std::isinf(lp) ? json(nullptr) : json(lp));
  return out;
}

inline std::vector<double> logprobs_from_json(const json& j) {
  if (!j.is_array()) protocol_error("'logprobs' must be an array");
  std::vector<double> out;
  for (const auto& v : j) {
    if (v.is_null()) {
      out.push_back(kNegInf);
    } else if (v.is_number()) {
      out.push_back(v.get<double>());
    } else {
      protocol_error("'logprobs' holds a non-number");
    }
  }
  return out;
}

inline json logits_to_json(const LogitsResult& r) {
  json out = envelope();
  json cands = json::array();
  for (const auto& c : r.candidates) {
    cands.push_back({{"id", index_of(c.token)}, {"logit", c.logit}, {"logprob", c.logprob}});
  }
  out["candidates"] = std::move(cands);
  out["complete"] = r.complete;
  return out;
}

inline LogitsResult logits_from_json(const json& body) {
  if (!body.contains("candidates") || !body.contains("complete") || !body.at("complete").is_boolean()) {
    protocol_error("logits response lacks 'candidates'/'complete'");
  }
  LogitsResult r;
  r.complete = body.at("complete").get<bool>();
  for (const auto& c : body.at("candidates")) {
    if (!c.contains("id") || !c.contains("logit") || !c.contains("logprob") || !c.at("logit").is_number() ||
        !c.at("logprob").is_number() || !c.at("id").is_number_integer()) {
      protocol_error("malformed logits candidate");
    }
    r.candidates.push_back({make_token(c.at("id").get<std::uint32_t>()), c.at("logit").get<double>(),
                            c.at("logprob").get<double>()});
  }
  return r;
}

/// Checks the version field of a response body.
inline void check_version(const json& body) {
  if (!body.is_object() || !body.contains("protocol_version") || !body.at("protocol_version").is_string()) {
    protocol_error("response lacks protocol_version");
  }
  const auto v = body.at("protocol_version").get<std::string>();
  if (v != kProtocolVersion) {
    protocol_error("server speaks '" + v + "', client supports '" + std::string(kProtocolVersion) + "'");
  }
}

inline json error_body(ErrorCode code, const std::string& message) {
  json out = envelope();
  out["error"] = {{"code", to_string(code)}, {"message", message}};
  return out;
}

}  // namespace tprm::remote
