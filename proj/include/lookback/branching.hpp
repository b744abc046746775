#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lookback/backend.hpp"
#include "lookback/trace.hpp"

namespace lookback::branching {

struct Branch {
  std::int64_t seed = 0;
  std::vector<TokenLogprob> tokens;
  std::vector<double> delta_content;  // per token, ppl_real - ppl_noise
  double score = 0.0;                 // V = -(1/len) * sum(delta_content)
  bool short_branch = false;          // stopped before the horizon
};

struct BranchSet {
  std::size_t origin_step = 0;
  int horizon = 0;
  std::vector<Branch> branches;
  std::vector<std::string> warnings;

  /// Every branch is billed, not only the winner.
  std::size_t billed_tokens() const;
};

/// Negated mean of the per-token content contrast. Averages over the actual
/// number of scored tokens; throws Precondition on an empty span.
double branch_score(std::span<const double> delta_content);

/// `count` distinct seeds derived from a pass seed and the trigger step.
std::vector<std::int64_t> branch_seeds(std::int64_t base_seed, std::size_t origin_step, int count);

struct SpawnRequest {
  std::string model_id;
  std::string question;
  VisualContext real;
  VisualContext noise;
  std::vector<std::string> prefix;  // everything emitted so far, ending with the injected template
  Sampling sampling;                // temperature/top_p/seed of the pass
  std::size_t origin_step = 0;
  int branches = 4;
  int horizon = 64;
  std::size_t jobs = 8;
};

/// Samples M continuations of at most H tokens from the common prefix, then
/// scores each under the real and noise images (two score calls per branch,
/// teacher-forcing prefix + branch and keeping the branch's logprobs).
/// Failed branches are dropped with a warning; throws if none survive.
BranchSet spawn_branches(const SpawnRequest& request, Backend& backend);

/// argmax of V; ties go to the lowest seed. Throws Precondition when empty.
std::size_t select_branch(const BranchSet& set);

BranchLog to_log(const BranchSet& set, std::size_t winner);

}  // namespace lookback::branching
