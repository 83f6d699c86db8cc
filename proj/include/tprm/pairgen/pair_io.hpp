// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#pragma once

// JSONL preference-pair records. One object per line with the fields below,
// in this order (docs/pair_schema.md). The same file is the benchmark input.

#include <cstdint>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tprm/core/error.hpp"
#include "tprm/core/text.hpp"
#include "tprm/core/types.hpp"
#include "tprm/pairgen/pairgen.hpp"
#include "tprm/providers/language_model.hpp"

namespace tprm::pairgen {

struct PairRecord {
  std::string pair_id;
  std::string lang_pair;
  Level level = Level::kToken;
  std::string source_text;
  std::vector<TokenId> prefix_token_ids;  // generated prefix y_<t (prompt excluded)
  std::string prefix_text;
  TokenId chosen_token_id{};
  TokenId rejected_token_id{};
  std::string chosen_text;  // continuation after the prefix, starting with the chosen token
  std::string rejected_text;
  double chosen_score = 0.0;
  double rejected_score = 0.0;
  std::string provider_tag;
  std::uint64_t seed = 0;

  friend bool operator==(const PairRecord&, const PairRecord&) = default;
};

inline constexpr const char* kPairFields[] = {
    "pair_id",           "lang_pair",     "level",        "source_text",    "prefix_token_ids",
    "prefix_text",       "chosen_token_id", "rejected_token_id", "chosen_text", "rejected_text",
    "chosen_score",      "rejected_score", "provider_tag", "seed"};

inline PairRecord to_record(const PreferencePair& p, const LanguageModel& lm) {
  const auto after = [&](const TokenSequence& r) {
    const auto n = p.prefix.continuation.size();
    return lm.detokenize(std::span<const TokenId>(r.continuation).subspan(n));
  };
  return PairRecord{p.pair_id,
                    p.lang_pair,
                    p.level,
                    p.source_text,
                    p.prefix.continuation,
                    lm.detokenize(p.prefix.continuation),
                    p.chosen_token,
                    p.rejected_token,
                    after(p.chosen_rollout),
                    after(p.rejected_rollout),
                    p.chosen_score.value(),
                    p.rejected_score.value(),
                    p.prefix.provider_tag,
                    p.seed};
}

inline nlohmann::ordered_json to_json(const PairRecord& r) {
  nlohmann::ordered_json j;
  j["pair_id"] = r.pair_id;
  j["lang_pair"] = r.lang_pair;
  j["level"] = to_string(r.level);
  j["source_text"] = r.source_text;
  j["prefix_token_ids"] = token_indices(r.prefix_token_ids);
  j["prefix_text"] = r.prefix_text;
  j["chosen_token_id"] = index_of(r.chosen_token_id);
  j["rejected_token_id"] = index_of(r.rejected_token_id);
  j["chosen_text"] = r.chosen_text;
  j["rejected_text"] = r.rejected_text;
  j["chosen_score"] = r.chosen_score;
  j["rejected_score"] = r.rejected_score;
  j["provider_tag"] = r.provider_tag;
  j["seed"] = r.seed;
  return j;
}

inline std::string to_jsonl_line(const PairRecord& r) { return to_json(r).dump(); }

namespace detail {

template <typename Json>
const Json& need(const Json& j, const char* key, std::size_t line) {
  if (!j.contains(key)) throw Error(ErrorCode::kSchemaError, line, key, "missing field");
  return j.at(key);
}

template <typename Json>
std::string need_string(const Json& j, const char* key, std::size_t line) {
  const auto& v = need(j, key, line);
  if (!v.is_string()) throw Error(ErrorCode::kSchemaError, line, key, "expected a string");
  return v.template get<std::string>();
}

template <typename Json>
std::uint64_t need_uint(const Json& j, const char* key, std::size_t line) {
  const auto& v = need(j, key, line);
  if (!v.is_number_unsigned()) throw Error(ErrorCode::kSchemaError, line, key, "expected a non-negative integer");
  return v.template get<std::uint64_t>();
}

template <typename Json>
double need_score(const Json& j, const char* key, std::size_t line) {
  const auto& v = need(j, key, line);
  if (!v.is_number()) throw Error(ErrorCode::kSchemaError, line, key, "expected a number");
  const double d = v.template get<double>();
  if (!(d >= 0.0 && d <= 1.0)) throw Error(ErrorCode::kSchemaError, line, key, "score outside [0, 1]");
  return d;
}

}  // namespace detail

/// Parses one JSONL line; `line` (1-based) is used in diagnostics.
inline PairRecord parse_record(std::string_view text, std::size_t line) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, line, "", e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kParseError, line, "", "expected a JSON object");

  using namespace detail;
  PairRecord r;
  r.pair_id = need_string(j, "pair_id", line);
  r.lang_pair = need_string(j, "lang_pair", line);
  const auto level = need_string(j, "level", line);
  if (level == "token") {
    r.level = Level::kToken;
  } else if (level == "sequence") {
    r.level = Level::kSequence;
  } else {
    throw Error(ErrorCode::kSchemaError, line, "level", "expected 'token' or 'sequence'");
  }
  r.source_text = need_string(j, "source_text", line);
  const auto& ids = need(j, "prefix_token_ids", line);
  if (!ids.is_array()) throw Error(ErrorCode::kSchemaError, line, "prefix_token_ids", "expected an array");
  for (const auto& v : ids) {
    if (!v.is_number_unsigned()) throw Error(ErrorCode::kSchemaError, line, "prefix_token_ids", "expected token ids");
    r.prefix_token_ids.push_back(make_token(v.get<std::uint32_t>()));
  }
  r.prefix_text = need_string(j, "prefix_text", line);
  r.chosen_token_id = make_token(static_cast<std::uint32_t>(need_uint(j, "chosen_token_id", line)));
  r.rejected_token_id = make_token(static_cast<std::uint32_t>(need_uint(j, "rejected_token_id", line)));
  r.chosen_text = need_string(j, "chosen_text", line);
  r.rejected_text = need_string(j, "rejected_text", line);
  r.chosen_score = need_score(j, "chosen_score", line);
  r.rejected_score = need_score(j, "rejected_score", line);
  r.provider_tag = need_string(j, "provider_tag", line);
  r.seed = need_uint(j, "seed", line);

  if (r.source_text.empty()) throw Error(ErrorCode::kSchemaError, line, "source_text", "must be non-empty");
  if (r.level == Level::kToken && r.chosen_token_id == r.rejected_token_id) {
    throw Error(ErrorCode::kSchemaError, line, "rejected_token_id", "token-level items need two distinct tokens");
  }
  if (r.level == Level::kSequence && (r.chosen_text.empty() || r.rejected_text.empty())) {
    throw Error(ErrorCode::kSchemaError, line, r.chosen_text.empty() ? "chosen_text" : "rejected_text",
                "sequence-level items need both continuations");
  }
  return r;
}

/// Reads a whole JSONL document. Blank lines are skipped.
inline std::vector<PairRecord> read_records(std::istream& in) {
  std::vector<PairRecord> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text::trim(text).empty()) continue;
    out.push_back(parse_record(text, line));
  }
  return out;
}

inline std::string write_records(const std::vector<PairRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_jsonl_line(r);
    out += '\n';
  }
  return out;
}

}  // namespace tprm::pairgen
