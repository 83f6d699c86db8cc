// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <utility>

#include "tprm/core/error.hpp"
#include "tprm/core/text.hpp"
#include "tprm/core/types.hpp"

namespace tprm {

/// Reference-free translation quality estimator (a QE metric in production,
/// an exact oracle in tests). Implementations are immutable and thread-safe.
class QualityScorer {
 public:
  virtual ~QualityScorer() = default;

  /// Both texts must be non-empty. `lang_pair` (e.g. "zh-en") is forwarded to
  /// scorers that need it and ignored by the toy oracles.
  QualityScore score(std::string_view source, std::string_view hypothesis,
                     std::string_view lang_pair = {}) const {
    require(!source.empty(), "source text must be non-empty");
    require(!hypothesis.empty(), "hypothesis text must be non-empty");
    return do_score(source, hypothesis, lang_pair);
  }

 protected:
  virtual QualityScore do_score(std::string_view source, std::string_view hypothesis,
                                std::string_view lang_pair) const = 0;
};

using ReferenceMap = std::map<std::string, std::string, std::less<>>;

namespace detail {
inline const std::string& lookup_reference(const ReferenceMap& refs, std::string_view source) {
  auto it = refs.find(source);
  if (it == refs.end()) {
    throw Error(ErrorCode::kScorerUnavailable, "no reference for source '" + std::string(source) + "'");
  }
  return it->second;
}
}  // namespace detail

/// Copy-task oracle: 1 on an exact match with the reference, else 0.
class ExactMatchScorer final : public QualityScorer {
 public:
  explicit ExactMatchScorer(ReferenceMap references) : refs_(std::move(references)) {}

 protected:
  QualityScore do_score(std::string_view source, std::string_view hypothesis,
                        std::string_view) const override {
    return QualityScore(detail::lookup_reference(refs_, source) == hypothesis ? 1.0 : 0.0);
  }

 private:
  ReferenceMap refs_;
};

/// 1 - d / max(|reference|, |hypothesis|), d the code-point edit distance.
class EditSimilarityScorer final : public QualityScorer {
 public:
  explicit EditSimilarityScorer(ReferenceMap references) : refs_(std::move(references)) {}

  static double similarity(std::string_view reference, std::string_view hypothesis) {
    const auto denom = std::max(text::length(reference), text::length(hypothesis));
    if (denom == 0) return 1.0;
    return 1.0 - static_cast<double>(text::edit_distance(reference, hypothesis)) /
                     static_cast<double>(denom);
  }

 protected:
  QualityScore do_score(std::string_view source, std::string_view hypothesis,
                        std::string_view) const override {
    return QualityScore(similarity(detail::lookup_reference(refs_, source), hypothesis));
  }

 private:
  ReferenceMap refs_;
};

class ConstantScorer final : public QualityScorer {
 public:
  explicit ConstantScorer(double value) : value_(value) {}

 protected:
  QualityScore do_score(std::string_view, std::string_view, std::string_view) const override {
    return value_;
  }

 private:
  QualityScore value_;
};

/// Adapts a callable; handy for hand-built test worlds.
class FunctionScorer final : public QualityScorer {
 public:
  using Fn = std::function<double(std::string_view source, std::string_view hypothesis)>;
  explicit FunctionScorer(Fn fn) : fn_(std::move(fn)) {}

 protected:
  QualityScore do_score(std::string_view source, std::string_view hypothesis,
                        std::string_view) const override {
    return QualityScore(fn_(source, hypothesis));
  }

 private:
  Fn fn_;
};

}  // namespace tprm
