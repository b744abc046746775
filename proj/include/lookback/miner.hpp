#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lookback/probe.hpp"
#include "lookback/trace.hpp"

namespace lookback::miner {

using probe::StepFlag;

inline constexpr std::string_view kVocabFormat = "lookback-vocab/1";
inline constexpr std::string_view kDefaultTemplate = "Looking back at the image, ";

struct PhraseEntry {
  std::string text;       // normalized words joined by single spaces
  int n = 0;              // word count
  double enrichment = 0.0;
  std::size_t support = 0;      // occurrences ending at a flagged step
  std::size_t occurrences = 0;  // all occurrences
  std::string injection;        // templates only: text appended to the stream
  bool operator==(const PhraseEntry&) const = default;
};

struct MiningParams {
  int n_min = 1;
  int n_max = 6;
  std::size_t min_support = 5;
  double min_enrichment = 4.0;
};

inline MiningParams default_pause_params() { return {1, 6, 5, 4.0}; }
inline MiningParams default_template_params() { return {3, 10, 5, 4.0}; }

struct Provenance {
  probe::Thresholds thresholds;
  std::optional<probe::QuantileLevels> quantiles;  // unset when thresholds were given explicitly
  MiningParams pause_params = default_pause_params();
  MiningParams template_params = default_template_params();
  std::string corpus_id;
  std::uint64_t run_seed = 0;
};

struct PhraseVocabulary {
  std::vector<PhraseEntry> pause_phrases;
  std::vector<PhraseEntry> lookback_templates;
  std::vector<std::string> seed_markers{"hmm", "wait"};
  std::string fallback_template;  // used when no template was mined; empty disables
  Provenance provenance;

  /// All pause phrases matched online: mined phrases plus seed markers.
  std::vector<std::string> trigger_phrases() const;
  /// Injection texts, falling back to `fallback_template`.
  std::vector<std::string> injection_texts() const;
};

nlohmann::json to_json(const PhraseVocabulary& v);
PhraseVocabulary vocabulary_from_json(const nlohmann::json& j);
/// Canonical serialization; identical vocabularies give identical bytes.
std::string dump(const PhraseVocabulary& v);

/// Per-token flags of each trace, aligned with `traces` by index. Steps with
/// no probe record are Neutral.
std::vector<std::vector<StepFlag>> align_flags(std::span<const ThinkingTrace> traces,
                                               std::span<const probe::ProbeRecord> records,
                                               std::span<const StepFlag> flags);

/// enrichment(g) = (flagged occurrences of g / occurrences of g) / (flagged
/// word positions / all word positions). An n-gram occurs at the step holding
/// its final word. Kept when support >= min_support and enrichment >=
/// min_enrichment, then dropped if a kept strict sub-gram has enrichment >= its
/// own. Sorted by descending enrichment, then text.
std::vector<PhraseEntry> mine_enriched(std::span<const ThinkingTrace> traces,
                                       std::span<const std::vector<StepFlag>> flags, StepFlag target,
                                       const MiningParams& params, bool correct_only = false,
                                       std::size_t jobs = 1);

std::vector<PhraseEntry> mine_pause_phrases(std::span<const ThinkingTrace> traces,
                                            std::span<const std::vector<StepFlag>> flags,
                                            const MiningParams& params = default_pause_params(),
                                            std::size_t jobs = 1);

/// Throws InsufficientData when no trace is labeled correct.
std::vector<PhraseEntry> mine_lookback_templates(std::span<const ThinkingTrace> traces,
                                                 std::span<const std::vector<StepFlag>> flags,
                                                 const MiningParams& params = default_template_params(),
                                                 std::size_t jobs = 1);

struct PhraseAlignment {
  std::string phrase;
  std::size_t occurrences = 0;
  std::size_t aligned = 0;
};

struct AlignmentReport {
  double rate = 0.0;
  std::size_t occurrences = 0;
  std::size_t aligned = 0;
  std::vector<PhraseAlignment> per_phrase;
  std::vector<std::string> warnings;
};

/// Fraction of occurrences of the vocabulary's trigger phrases whose final word
/// lands on a PresenceSensitive step. Phrases that never occur are excluded
/// with a warning.
AlignmentReport alignment_rate(const PhraseVocabulary& vocab, std::span<const ThinkingTrace> traces,
                               std::span<const std::vector<StepFlag>> flags);

nlohmann::json to_json(const AlignmentReport& r);

}  // namespace lookback::miner
