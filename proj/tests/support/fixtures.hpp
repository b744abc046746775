#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lookback/config.hpp"
#include "lookback/eval.hpp"
#include "lookback/miner.hpp"
#include "lookback/mock_backend.hpp"
#include "lookback/probe.hpp"
#include "lookback/trace.hpp"

namespace lookback::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

/// Builds a trace whose tokens are the given texts, all in the thinking phase.
ThinkingTrace make_trace(const std::string& id, const std::vector<std::string>& tokens, bool correct = true);

/// Whitespace-led word tokens: "a b c" -> {" a", " b", " c"}.
std::vector<std::string> word_tokens(const std::string& text);

struct PlantedCorpus {
  std::vector<ThinkingTrace> traces;
  std::vector<std::vector<probe::StepFlag>> flags;
  std::string planted;
  std::size_t tokens = 0;
  std::size_t planted_occurrences = 0;
  std::size_t background_flagged = 0;
  std::size_t background_tokens = 0;
};

/// ~`target_tokens` one-word tokens of random filler with `planted` inserted
/// at random places. Every planted occurrence ends on a PresenceSensitive step;
/// other steps are flagged with probability `background_rate`.
PlantedCorpus planted_corpus(std::uint64_t seed, std::size_t target_tokens = 50000,
                             const std::string& planted = "let me reconsider", double background_rate = 0.015,
                             std::size_t occurrences = 200);

/// 100 occurrences of "hmm", the first `aligned` of them on PresenceSensitive steps.
struct AlignmentFixture {
  std::vector<ThinkingTrace> traces;
  std::vector<std::vector<probe::StepFlag>> flags;
  miner::PhraseVocabulary vocab;
};
AlignmentFixture alignment_fixture(std::size_t aligned = 89, std::size_t total = 100);

/// 1000 questions in one category, one pass each, encoding a Pass@1 of 69.7
/// vs 67.0 and 5,720 vs 10,000 total tokens.
struct Table3Records {
  std::vector<eval::EvalRecord> ours;
  std::vector<eval::EvalRecord> original;
};
Table3Records table3_records();

/// Writes 20 questions with PNG images, a mock script and a run config into
/// `dir`. Returns the config path.
struct E2EFixture {
  std::string config_path;
  std::string mock_path;
  std::size_t questions = 0;
};
E2EFixture write_e2e_fixture(const std::filesystem::path& dir, std::size_t questions = 20, int passes = 2);

MockScript e2e_script();

}  // namespace lookback::testing
