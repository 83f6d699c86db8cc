// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#pragma once

// Run configuration: one JSON document naming a backend per provider slot
// plus per-module settings. Relative paths resolve against the config file's
// directory. Command-line flags are written into the document before it is
// hashed and parsed, so the manifest hash always covers the effective config.
// Schema: docs/config.md.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tprm/core/error.hpp"
#include "tprm/core/text.hpp"
#include "tprm/implicit_prm/rewards.hpp"
#include "tprm/pairgen/pairgen.hpp"
#include "tprm/providers/toy_io.hpp"
#include "tprm/remote/client.hpp"
#include "tprm/tta/decoder.hpp"

namespace tprm::cli {

using nlohmann::json;

inline const char* const kSlots[] = {"generator", "prm_policy", "prm_reference", "scorer"};

struct ProviderSpec {
  std::optional<std::string> toy_path;  // resolved absolute path
  std::optional<remote::Endpoint> endpoint;
  std::string remote_tag;               // model or scorer tag on the server
};

struct RunConfig {
  std::string path;
  json document;  // effective config after flag overrides
  std::uint64_t seed = 0;
  std::map<std::string, ProviderSpec> providers;
  pairgen::PairgenConfig pairgen;
  prm::RewardConfig reward;
  tta::DecodeConfig decode;
  std::vector<double> w_grid{0.0, 0.3, 0.5, 0.7};
  std::string sweep_label = "PRM-guided";
  std::string lang_pair;
  std::optional<std::string> sources_path;
  std::vector<std::string> inline_sources;

  std::string hash() const { return text::fnv1a_hex(document.dump()); }

  const ProviderSpec& slot(const std::string& name, const std::string& command) const {
    auto it = providers.find(name);
    if (it == providers.end()) {
      throw Error(ErrorCode::kConfigError, "providers." + name + " is required for '" + command + "'");
    }
    return it->second;
  }
  bool has(const std::string& name) const { return providers.count(name) != 0; }
};

namespace detail {

[[noreturn]] inline void bad(const std::string& what) { throw Error(ErrorCode::kConfigError, what); }

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    bad(where + "." + key + " has the wrong type");
  }
}

inline std::string resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative()) path = base / path;
  return path.lexically_normal().string();
}

inline remote::Endpoint parse_endpoint(const json& r, const std::string& where) {
  remote::Endpoint e;
  e.base_url = get_or<std::string>(r, "base_url", "", where);
  if (e.base_url.empty()) bad(where + ".base_url is required");
  e.timeout = std::chrono::milliseconds(get_or<std::int64_t>(r, "timeout_ms", 30000, where));
  e.max_retries = get_or<int>(r, "max_retries", 3, where);
  if (r.contains("auth_token")) e.auth_token = get_or<std::string>(r, "auth_token", "", where);
  e.backoff_initial = std::chrono::milliseconds(get_or<std::int64_t>(r, "backoff_initial_ms", 200, where));
  e.batch_size = get_or<std::size_t>(r, "batch_size", 8, where);
  e.max_in_flight = get_or<std::size_t>(r, "max_in_flight", 8, where);
  try {
    e.validate();
  } catch (const Error& err) {
    bad(where + ": " + err.what());
  }
  return e;
}

inline ProviderSpec parse_slot(const std::string& name, const json& spec, const std::filesystem::path& base) {
  const std::string where = "providers." + name;
  if (!spec.is_object()) bad(where + " must be an object");
  const bool toy = spec.contains("toy");
  const bool rem = spec.contains("remote");
  if (toy == rem) bad(where + " needs exactly one backend: 'toy' or 'remote'");
  ProviderSpec out;
  if (toy) {
    out.toy_path = resolve(base, get_or<std::string>(spec, "toy", "", where));
    if (!std::filesystem::exists(*out.toy_path)) bad(where + ".toy: file '" + *out.toy_path + "' does not exist");
  } else {
    const auto& r = spec.at("remote");
    out.endpoint = parse_endpoint(r, where + ".remote");
    const char* key = name == "scorer" ? "scorer" : "model";
    out.remote_tag = get_or<std::string>(r, key, "", where + ".remote");
    if (out.remote_tag.empty()) bad(where + ".remote." + key + " is required");
  }
  return out;
}

}  // namespace detail

/// Parses an effective config document. `path` locates relative files.
inline RunConfig parse_config(json doc, const std::string& path) {
  using detail::bad;
  using detail::get_or;
  if (!doc.is_object()) bad(path + ": config must be a JSON object");
  const auto base = std::filesystem::path(path).parent_path();

  RunConfig cfg;
  cfg.path = path;
  cfg.seed = get_or<std::uint64_t>(doc, "seed", 0, "config");

  if (doc.contains("providers")) {
    const auto& providers = doc.at("providers");
    if (!providers.is_object()) bad("providers must be an object");
    for (const auto& [name, spec] : providers.items()) {
      bool known = false;
      for (const char* s : kSlots) known = known || name == s;
      if (!known) bad("providers." + name + " is not a provider slot");
      cfg.providers.emplace(name, detail::parse_slot(name, spec, base));
    }
  }

  const json empty = json::object();
  const auto& pg = doc.contains("pairgen") ? doc.at("pairgen") : empty;
  cfg.pairgen.n_rollouts = get_or<std::size_t>(pg, "n_rollouts", 3, "pairgen");
  cfg.pairgen.temperature = get_or<double>(pg, "temperature", 0.95, "pairgen");
  cfg.pairgen.gap_min = get_or<double>(pg, "gap_min", 0.04, "pairgen");
  cfg.pairgen.gap_max = get_or<double>(pg, "gap_max", 0.4, "pairgen");
  cfg.pairgen.max_len = get_or<std::size_t>(pg, "max_len", kDefaultMaxLen, "pairgen");
  cfg.pairgen.enumeration_cap = get_or<std::size_t>(pg, "enumeration_cap", 100000, "pairgen");
  cfg.pairgen.rollout_jobs = get_or<std::size_t>(pg, "rollout_jobs", 1, "pairgen");
  const auto mode = get_or<std::string>(pg, "simulation_mode", "sampled", "pairgen");
  if (mode == "sampled") {
    cfg.pairgen.simulation_mode = pairgen::SimulationMode::kSampled;
  } else if (mode == "exhaustive") {
    cfg.pairgen.simulation_mode = pairgen::SimulationMode::kExhaustive;
  } else {
    bad("pairgen.simulation_mode must be 'sampled' or 'exhaustive'");
  }
  cfg.pairgen.seed = cfg.seed;

  const auto& rw = doc.contains("reward") ? doc.at("reward") : empty;
  cfg.reward.beta = get_or<double>(rw, "beta", 0.1, "reward");

  const auto& dc = doc.contains("decode") ? doc.at("decode") : empty;
  cfg.decode.w = get_or<double>(dc, "w", 0.0, "decode");
  cfg.decode.k = get_or<std::size_t>(dc, "k", 10, "decode");
  cfg.decode.max_len = get_or<std::size_t>(dc, "max_len", kDefaultMaxLen, "decode");
  cfg.decode.beta = cfg.reward.beta;
  cfg.decode.log_space = get_or<bool>(dc, "log_space", false, "decode");
  const auto dmode = get_or<std::string>(dc, "mode", "reward_guided", "decode");
  if (dmode == "greedy") {
    cfg.decode.mode = tta::DecodeMode::kGreedy;
  } else if (dmode == "reward_guided") {
    cfg.decode.mode = tta::DecodeMode::kRewardGuided;
  } else {
    bad("decode.mode must be 'greedy' or 'reward_guided'");
  }

  const auto& sw = doc.contains("sweep") ? doc.at("sweep") : empty;
  cfg.w_grid = get_or<std::vector<double>>(sw, "w_grid", cfg.w_grid, "sweep");
  cfg.sweep_label = get_or<std::string>(sw, "label", cfg.sweep_label, "sweep");

  const auto& io = doc.contains("io") ? doc.at("io") : empty;
  cfg.lang_pair = get_or<std::string>(io, "lang_pair", "", "io");
  if (io.contains("sources_path")) {
    cfg.sources_path = detail::resolve(base, get_or<std::string>(io, "sources_path", "", "io"));
    if (!std::filesystem::exists(*cfg.sources_path)) bad("io.sources_path: '" + *cfg.sources_path + "' does not exist");
  }
  cfg.inline_sources = get_or<std::vector<std::string>>(io, "sources", {}, "io");

  try {
    cfg.pairgen.validate();
    cfg.reward.validate();
    cfg.decode.validate();
  } catch (const Error& e) {
    bad(e.what());
  }
  cfg.document = std::move(doc);
  return cfg;
}

inline json load_config_document(const std::string& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kConfigError, "config '" + path + "' does not exist");
  try {
    return json::parse(text::read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, path + ": " + e.what());
  }
}

/// Instantiated providers for one run.
struct Providers {
  std::map<std::string, std::shared_ptr<const LanguageModel>> models;
  std::shared_ptr<const QualityScorer> scorer;

  const LanguageModel& model(const std::string& slot) const { return *models.at(slot); }
};

inline std::shared_ptr<const LanguageModel> make_model(const ProviderSpec& spec) {
  if (spec.toy_path) return toy::load_language_model_file(*spec.toy_path);
  return std::make_shared<remote::RemoteLM>(*spec.endpoint, spec.remote_tag);
}

inline std::shared_ptr<const QualityScorer> make_scorer(const ProviderSpec& spec, const std::string& lang_pair) {
  if (spec.toy_path) return toy::load_scorer_file(*spec.toy_path);
  return std::make_shared<remote::RemoteScorer>(*spec.endpoint, spec.remote_tag, lang_pair);
}

/// Builds the named slots; every slot must be configured.
inline Providers make_providers(const RunConfig& cfg, const std::vector<std::string>& slots, const std::string& command) {
  Providers p;
  for (const auto& name : slots) {
    const auto& spec = cfg.slot(name, command);
    if (name == "scorer") {
      p.scorer = make_scorer(spec, cfg.lang_pair);
    } else {
      p.models[name] = make_model(spec);
    }
  }
  return p;
}

}  // namespace tprm::cli
