// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#pragma once

// Loads toy model and scorer definitions from JSON documents. The schema is
// documented in docs/toy_models.md.

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "tprm/core/error.hpp"
#include "tprm/core/text.hpp"
#include "tprm/providers/scorer.hpp"
#include "tprm/providers/toy_lm.hpp"

namespace tprm::toy {

using nlohmann::json;

namespace detail {

[[noreturn]] inline void bad(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::kConfigError, where + ": " + what);
}

inline const json& field(const json& doc, const char* key, const std::string& where) {
  if (!doc.is_object() || !doc.contains(key)) bad(where, std::string("missing key '") + key + "'");
  return doc.at(key);
}

inline std::vector<double> parse_row(const json& row, const Vocabulary& vocab, const std::string& where) {
  if (!row.is_object()) bad(where, "probability table must be an object");
  std::vector<double> out(vocab.size(), 0.0);
  double total = 0.0;
  for (const auto& [text, p] : row.items()) {
    if (!p.is_number()) bad(where, "probability for '" + text + "' is not a number");
    const double v = p.get<double>();
    if (!(v >= 0.0) || !std::isfinite(v)) bad(where, "probability for '" + text + "' must be >= 0");
    TokenId id{};
    try {
      id = vocab.id(text);
    } catch (const Error&) {
      bad(where, "'" + text + "' is not in the vocabulary");
    }
    out[index_of(id)] = v;
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    bad(where, "probabilities sum to " + text::format_double(total) + ", expected 1");
  }
  return out;
}

}  // namespace detail

inline std::shared_ptr<LanguageModel> load_language_model(const json& doc, const std::string& origin = "model") {
  using detail::bad;
  using detail::field;
  const auto tag = field(doc, "tag", origin).get<std::string>();
  const auto eos = field(doc, "eos", origin).get<std::string>();
  const auto type = field(doc, "type", origin).get<std::string>();
  auto vocab = std::make_shared<const Vocabulary>(field(doc, "vocab", origin).get<std::vector<std::string>>(), eos);

  if (type == "uniform") return TableLM::uniform(tag, vocab);
  if (type == "table") {
    return std::make_shared<TableLM>(tag, vocab, detail::parse_row(field(doc, "probs", origin), *vocab, origin + ".probs"));
  }
  if (type == "ngram") {
    std::map<TokenId, std::vector<double>> rows;
    if (doc.contains("rows")) {
      for (const auto& [prev, row] : doc.at("rows").items()) {
        rows.emplace(vocab->id(prev), detail::parse_row(row, *vocab, origin + ".rows." + prev));
      }
    }
    auto fallback = detail::parse_row(field(doc, "fallback", origin), *vocab, origin + ".fallback");
    return std::make_shared<NGramLM>(tag, vocab, std::move(rows), std::move(fallback));
  }
  if (type == "context") {
    // Rows keyed by the text generated so far ("" is the first step).
    std::map<std::string, std::vector<double>, std::less<>> rows;
    if (doc.contains("rows")) {
      for (const auto& [hyp, row] : doc.at("rows").items()) {
        rows.emplace(hyp, detail::parse_row(row, *vocab, origin + ".rows[" + hyp + "]"));
      }
    }
    auto fallback = detail::parse_row(field(doc, "fallback", origin), *vocab, origin + ".fallback");
    auto fn = [vocab, rows = std::move(rows), fallback = std::move(fallback)](
                  std::span<const TokenId> context, std::size_t prompt_len) {
      const auto hyp = vocab->detokenize(context.subspan(prompt_len));
      auto it = rows.find(hyp);
      return it == rows.end() ? fallback : it->second;
    };
    return std::make_shared<ScriptedLM>(tag, vocab, std::move(fn));
  }
  bad(origin, "unknown model type '" + type + "'");
}

inline std::shared_ptr<QualityScorer> load_scorer(const json& doc, const std::string& origin = "scorer") {
  using detail::bad;
  using detail::field;
  const auto type = field(doc, "type", origin).get<std::string>();
  auto references = [&] {
    ReferenceMap refs;
    for (const auto& [src, tgt] : field(doc, "references", origin).items()) refs.emplace(src, tgt.get<std::string>());
    return refs;
  };
  if (type == "exact_match") return std::make_shared<ExactMatchScorer>(references());
  if (type == "edit_similarity") return std::make_shared<EditSimilarityScorer>(references());
  if (type == "constant") return std::make_shared<ConstantScorer>(field(doc, "value", origin).get<double>());
  bad(origin, "unknown scorer type '" + type + "'");
}

inline json parse_json_file(const std::string& path) {
  try {
    return json::parse(text::read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, path + ": " + e.what());
  }
}

inline std::shared_ptr<LanguageModel> load_language_model_file(const std::string& path) {
  try {
    return load_language_model(parse_json_file(path), path);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, path + ": " + e.what());
  }
}

inline std::shared_ptr<QualityScorer> load_scorer_file(const std::string& path) {
  try {
    return load_scorer(parse_json_file(path), path);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, path + ": " + e.what());
  }
}

}  // namespace tprm::toy
