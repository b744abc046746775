#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "lookback/backend.hpp"
#include "lookback/config.hpp"
#include "lookback/miner.hpp"
#include "lookback/trace.hpp"

namespace lookback::pipeline {

struct RunOptions {
  bool dry_run = false;         // plan backend calls, touch nothing
  bool force = false;           // report: accept inputs with mixed config hashes
  std::ostream* log = nullptr;  // progress and warnings; null is silent
};

struct CallPlan {
  std::size_t score = 0;
  std::size_t generate = 0;
  bool lower_bound = false;  // injections and branches add calls that cannot be known up front
};

struct ProbeSummary {
  std::size_t traces = 0;
  std::size_t records = 0;
  std::size_t skipped = 0;  // traces whose question or image was unavailable
  std::size_t reused = 0;   // score results taken from the manifest
  std::size_t truncated = 0;  // traces cut to probe.max_tokens
  CallPlan planned;
  std::vector<std::string> warnings;
};

struct MineSummary {
  miner::PhraseVocabulary vocab;
  miner::AlignmentReport alignment;
  std::vector<std::string> warnings;
};

struct DecodeSummary {
  std::size_t units = 0;  // (question, pass) pairs
  std::size_t resumed = 0;
  std::size_t decoded = 0;
  std::size_t failed = 0;
  CallPlan planned;
  std::vector<std::string> warnings;
};

struct EvalSummary {
  std::size_t records = 0;
  std::vector<std::string> warnings;
};

struct ReportSummary {
  std::vector<std::string> outputs;
  std::vector<std::string> warnings;
};

/// "mock://<script.json>" (path relative to the config) or "mock://" for the
/// built-in script; anything else is an HTTP server URL. The auth token is read
/// from the environment variable named in the config.
std::unique_ptr<Backend> make_backend(const config::RunConfig& cfg);

/// 2 config, 3 backend, 4 data coverage, 1 anything else.
int exit_code_for(ErrorKind kind);

/// Image paths are resolved against the questions file's directory.
std::vector<Question> load_questions(const std::string& path);

/// Per-(question, pass) sampling seed, distinct across passes.
std::int64_t pass_seed(std::int64_t run_seed, const std::string& question_id, int pass_index);

/// Header comment carried by every CSV output.
std::string hash_comment(const std::string& config_hash);

ProbeSummary cmd_probe(const config::RunConfig& cfg, Backend& backend, const RunOptions& opts = {});
MineSummary cmd_mine(const config::RunConfig& cfg, const RunOptions& opts = {});
DecodeSummary cmd_decode(const config::RunConfig& cfg, Backend& backend, const RunOptions& opts = {});
EvalSummary cmd_eval(const config::RunConfig& cfg, const RunOptions& opts = {});
ReportSummary cmd_report(const config::RunConfig& cfg, const RunOptions& opts = {});

}  // namespace lookback::pipeline
