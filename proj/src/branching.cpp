#include "lookback/branching.hpp"

#include <cmath>
#include <future>
#include <optional>

#include "lookback/parallel.hpp"

namespace lookback::branching {

std::size_t BranchSet::billed_tokens() const {
  std::size_t n = 0;
  for (const auto& b : branches) n += b.tokens.size();
  return n;
}

double branch_score(std::span<const double> delta_content) {
  require(!delta_content.empty(), ErrorKind::Precondition, "branch score needs at least one token");
  double sum = 0.0;
  for (double d : delta_content) sum += d;
  return -sum / static_cast<double>(delta_content.size());
}

std::vector<std::int64_t> branch_seeds(std::int64_t base_seed, std::size_t origin_step, int count) {
  // splitmix64 of (seed, step), then consecutive offsets keep the set distinct
  std::uint64_t z = static_cast<std::uint64_t>(base_seed) ^ (0x9e3779b97f4a7c15ULL * (origin_step + 1));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  z &= 0x3fffffffffffffffULL;  // keep clear of overflow when adding offsets
  std::vector<std::int64_t> seeds;
  for (int m = 0; m < count; ++m) seeds.push_back(static_cast<std::int64_t>(z) + m);
  return seeds;
}

namespace {

struct Attempt {
  std::optional<Branch> branch;
  std::string warning;
};

}  // namespace

BranchSet spawn_branches(const SpawnRequest& req, Backend& backend) {
  require(req.branches >= 2, ErrorKind::Precondition, "branching needs M >= 2");
  require(req.horizon > 0, ErrorKind::Precondition, "branch horizon must be positive");
  require(req.real.kind == ContextKind::Real && req.noise.kind == ContextKind::Noise, ErrorKind::Precondition,
          "branch scoring needs a real and a noise context");

  const auto seeds = branch_seeds(req.sampling.seed, req.origin_step, req.branches);
  std::vector<Attempt> attempts(seeds.size());

  // Generation, then the two scoring calls, per branch; branches run concurrently.
  parallel_for(seeds.size(), req.jobs, [&](std::size_t m) {
    Attempt& a = attempts[m];
    GenerateRequest g;
    g.model_id = req.model_id;
    g.question = req.question;
    g.context = req.real;
    g.prefix = req.prefix;
    g.sampling = req.sampling;
    g.sampling.seed = seeds[m];
    g.sampling.max_new_tokens = req.horizon;
    Branch b;
    b.seed = seeds[m];
    try {
      b.tokens = backend.generate_stream(g, [](const StreamToken&) { return true; }).tokens;
    } catch (const std::exception& e) {
      a.warning = "branch seed " + std::to_string(b.seed) + " generation failed: " + e.what();
      return;
    }
    if (b.tokens.empty()) {
      a.warning = "branch seed " + std::to_string(b.seed) + " produced no tokens";
      return;
    }
    ScoreRequest s;
    s.model_id = req.model_id;
    s.question = req.question;
    s.continuation = req.prefix;
    for (const auto& t : b.tokens) s.continuation.push_back(t.text);
    try {
      auto sr = std::async(std::launch::async, [&] {
        auto r = s;
        r.context = req.real;
        return backend.score(r);
      });
      auto sn = s;
      sn.context = req.noise;
      auto noise = backend.score(sn);
      auto real = sr.get();
      const std::size_t off = req.prefix.size();
      for (std::size_t i = 0; i < b.tokens.size(); ++i) {
        b.delta_content.push_back(std::exp(-real.tokens[off + i].logprob) - std::exp(-noise.tokens[off + i].logprob));
      }
    } catch (const std::exception& e) {
      a.warning = "branch seed " + std::to_string(b.seed) + " dropped, scoring failed: " + e.what();
      return;
    }
    b.score = branch_score(b.delta_content);
    b.short_branch = static_cast<int>(b.tokens.size()) < req.horizon;
    if (b.short_branch) {
      a.warning = "branch seed " + std::to_string(b.seed) + " stopped after " + std::to_string(b.tokens.size()) +
                  " of " + std::to_string(req.horizon) + " tokens; score averages actual length";
    }
    a.branch = std::move(b);
  });

  BranchSet set;
  set.origin_step = req.origin_step;
  set.horizon = req.horizon;
  for (auto& a : attempts) {
    if (!a.warning.empty()) set.warnings.push_back(a.warning);
    if (a.branch) set.branches.push_back(std::move(*a.branch));
  }
  if (set.branches.empty()) {
    std::string why = set.warnings.empty() ? std::string("no branch survived") : set.warnings.front();
    fail(ErrorKind::Stream, "all " + std::to_string(req.branches) + " branches failed: " + why);
  }
  return set;
}

std::size_t select_branch(const BranchSet& set) {
  require(!set.branches.empty(), ErrorKind::Precondition, "cannot select from an empty branch set");
  std::size_t best = 0;
  for (std::size_t i = 1; i < set.branches.size(); ++i) {
    const auto& b = set.branches[i];
    const auto& cur = set.branches[best];
    if (b.score > cur.score || (b.score == cur.score && b.seed < cur.seed)) best = i;
  }
  return best;
}

BranchLog to_log(const BranchSet& set, std::size_t winner) {
  BranchLog log;
  log.origin_step = set.origin_step;
  log.horizon = set.horizon;
  log.winner = winner;
  log.overhead_tokens = set.billed_tokens();
  log.warnings = set.warnings;
  for (const auto& b : set.branches) {
    BranchLogEntry e;
    e.seed = b.seed;
    for (const auto& t : b.tokens) e.tokens.push_back(t.text);
    e.delta_content = b.delta_content;
    e.score = b.score;
    e.short_branch = b.short_branch;
    log.branches.push_back(std::move(e));
  }
  return log;
}

}  // namespace lookback::branching
