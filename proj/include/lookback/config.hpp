#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lookback/controller.hpp"
#include "lookback/eval.hpp"
#include "lookback/probe.hpp"

namespace lookback::config {

/// Parses the TOML subset used by run files: [section] headers, key = value
/// with strings, integers, floats, booleans and single-line arrays, and
/// '#' comments. Returns {section: {key: value}}; top-level keys land in "".
nlohmann::json parse_toml(const std::string& content, const std::string& origin = "<config>");

/// Parses one TOML value; bare words that are not valid values come back as strings.
nlohmann::json parse_value(const std::string& raw);

struct BackendConfig {
  std::string base_url = "mock://";  // mock://<script.json> selects the bundled mock
  std::string model_id = "mock-vlm";
  std::string auth_env_var = "LOOKBACK_AUTH_TOKEN";
  int max_retries = 3;
  int retry_base_ms = 200;
  int in_flight = 8;
};

struct SamplingConfig {
  double temperature = 0.7;
  double top_p = 0.95;
  int n_passes = 10;
  std::int64_t seed = 0;
  std::string mode = "thinking";  // "thinking" | "instruct", selects the budget
};

struct BudgetConfig {
  int instruct_max = 16384;
  int thinking_max = 32768;
};

struct BranchingConfig {
  bool enabled = false;
  int m = 4;
  int h = 64;
};

struct ProbeConfig {
  probe::QuantileLevels quantiles;
  std::optional<probe::Thresholds> manual;  // all three of presence_abs/content_abs/grounded
  int bins = probe::kDefaultBins;
  int max_tokens = 0;  // 0 scores full traces
  double noise_mean = 0.5;
  double noise_std = 0.25;
};

struct MinerConfig {
  miner::MiningParams pause = miner::default_pause_params();
  miner::MiningParams templates = miner::default_template_params();
  bool use_fallback_template = true;
  std::string fallback_template = std::string(miner::kDefaultTemplate);
};

struct EvalConfig {
  std::string method_id = "lookback";
  eval::Pass1Mode pass1_mode = eval::Pass1Mode::MeanOverPasses;
  eval::AnswerPatterns answer_patterns;
};

struct Paths {
  std::string questions;
  std::string traces = "traces.jsonl";
  std::string probe_records = "probe_records.jsonl";
  std::string curves = "curves.csv";
  std::string vocab = "vocab.json";
  std::string eval_records = "eval_records.jsonl";
  std::string reports = "reports";
  std::string work = "work";  // manifests and score caches
  std::string original;                // eval records of the unmodified model, for comparisons
  std::vector<std::string> baselines;  // further eval record files for pass@k / z-scores / footprints
};

struct RunConfig {
  BackendConfig backend;
  SamplingConfig sampling;
  BudgetConfig budgets;
  bool controller_enabled = true;
  controller::ControllerConfig controller;
  BranchingConfig branching;
  ProbeConfig probe;
  MinerConfig miner;
  EvalConfig eval;
  Paths paths;
  std::string base_dir = ".";  // relative paths resolve against this

  int budget() const { return sampling.mode == "instruct" ? budgets.instruct_max : budgets.thinking_max; }
  std::string resolve(const std::string& path) const;

  /// Budgets > 0, n_passes >= 1, controller invariants, known enums.
  void validate() const;

  nlohmann::json to_json() const;
  /// Hex digest of the canonical effective config.
  std::string hash() const;
};

/// Builds a config from a parsed tree, rejecting unknown sections and keys.
RunConfig from_tree(const nlohmann::json& tree, const std::string& base_dir = ".");

/// Loads a run file and applies "section.key=value" overrides on top.
RunConfig load(const std::string& path, const std::vector<std::string>& overrides = {});

void apply_override(nlohmann::json& tree, const std::string& assignment);

}  // namespace lookback::config
