// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace tprm {

enum class ErrorCode {
  kInvalidArgument,
  kUnknownToken,
  kTokenizerMismatch,
  kDegenerateDistribution,
  kExhaustiveTooLarge,
  kProviderUnavailable,
  kScorerUnavailable,
  kProtocolMismatch,
  kRemoteModelError,
  kParseError,
  kSchemaError,
  kConfigError,
  kIoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kUnknownToken: return "unknown_token";
    case ErrorCode::kTokenizerMismatch: return "tokenizer_mismatch";
    case ErrorCode::kDegenerateDistribution: return "degenerate_distribution";
    case ErrorCode::kExhaustiveTooLarge: return "exhaustive_too_large";
    case ErrorCode::kProviderUnavailable: return "provider_unavailable";
    case ErrorCode::kScorerUnavailable: return "scorer_unavailable";
    case ErrorCode::kProtocolMismatch: return "protocol_mismatch";
    case ErrorCode::kRemoteModelError: return "remote_model_error";
    case ErrorCode::kParseError: return "parse_error";
    case ErrorCode::kSchemaError: return "schema_error";
    case ErrorCode::kConfigError: return "config_error";
    case ErrorCode::kIoError: return "io_error";
  }
  return "unknown";
}

inline std::optional<ErrorCode> error_code_from_string(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(ErrorCode::kIoError); ++i) {
    auto code = static_cast<ErrorCode>(i);
    if (to_string(code) == name) return code;
  }
  return std::nullopt;
}

/// Every failure raised by the toolkit. `line` and `field` are set for
/// document-level errors (JSONL inputs, config files); line numbers are 1-based.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Error(ErrorCode code, std::size_t line, std::string field, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + " at line " + std::to_string(line) +
                           (field.empty() ? std::string() : " (field '" + field + "')") + ": " +
                           message),
        code_(code),
        line_(line),
        field_(std::move(field)) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> line_;
  std::string field_;
};

inline void require(bool condition, std::string_view what) {
  if (!condition) throw Error(ErrorCode::kInvalidArgument, std::string(what));
}

}  // namespace tprm
