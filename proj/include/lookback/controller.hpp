#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lookback/backend.hpp"
#include "lookback/miner.hpp"
#include "lookback/trace.hpp"

namespace lookback::controller {

enum class TemplatePolicy { RoundRobin, TopEnrichment, SeededRandom };

std::string_view to_string(TemplatePolicy p);
TemplatePolicy template_policy_from_string(std::string_view s);

struct ControllerConfig {
  std::size_t suffix_len = 8;         // words
  std::size_t cooldown_window = 128;  // thinking tokens
  std::size_t max_injections = 8;     // per pass
  TemplatePolicy template_policy = TemplatePolicy::RoundRobin;
  std::vector<std::string> answer_markers{"Final Answer", "\\boxed{"};
  std::string think_close_marker = "</think>";
  std::uint64_t template_seed = 0;

  /// Throws Config unless suffix_len > 0, cooldown_window > 0 and
  /// cooldown_window >= suffix_len.
  void validate() const;
};

/// Longest-suffix matcher over normalized word sequences: a trie keyed on
/// words read right to left, so one walk from the newest word finds the
/// longest phrase ending there.
class SuffixMatcher {
 public:
  explicit SuffixMatcher(const std::vector<std::string>& phrases);

  bool empty() const { return phrase_count_ == 0; }
  std::size_t max_words() const { return max_words_; }

  /// `words` is oldest-to-newest; returns the longest phrase that is a
  /// word-level suffix of it.
  std::optional<std::string> longest_suffix(const std::vector<std::string>& words) const;

 private:
  struct Node {
    std::vector<std::pair<std::string, std::size_t>> children;  // word -> node index
    std::optional<std::string> phrase;
  };
  std::size_t child(std::size_t node, const std::string& word) const;

  std::vector<Node> nodes_;
  std::size_t phrase_count_ = 0;
  std::size_t max_words_ = 0;
};

struct Template {
  std::string text;  // appended verbatim
  double enrichment = 0.0;
};

std::vector<Template> templates_from(const miner::PhraseVocabulary& vocab);

/// Live state of one controlled decode.
class DecodeSession {
 public:
  DecodeSession(const ControllerConfig& config, std::size_t budget, std::uint64_t pass_seed = 0);

  /// Appends a sampled token, updating phase, rolling suffix, cooldown and budget.
  void observe(const std::string& text, double logprob);

  /// Appends forced template text and logs the injection.
  void append_injection(const std::string& template_text, const std::string& trigger);

  /// Last suffix_len words (normalized), oldest first. The word currently being
  /// spelled counts as a word.
  std::vector<std::string> rolling_suffix() const;

  const std::vector<TraceToken>& emitted() const { return emitted_; }
  std::vector<std::string> emitted_texts() const;
  const std::vector<InjectionEvent>& injections() const { return injections_; }
  /// Thinking tokens sampled since the last injection; nullopt before the first.
  std::optional<std::size_t> tokens_since_trigger() const { return tokens_since_trigger_; }
  bool in_answer_phase() const { return in_answer_phase_; }
  std::size_t budget() const { return budget_; }
  std::size_t budget_used() const { return budget_used_; }
  std::size_t budget_left() const { return budget_used_ >= budget_ ? 0 : budget_ - budget_used_; }
  void charge(std::size_t tokens) { budget_used_ += tokens; }
  bool truncated() const { return truncated_; }
  void mark_truncated() { truncated_ = true; }
  const ControllerConfig& config() const { return config_; }

  std::size_t next_template_index(const std::vector<Template>& templates);

  // test hooks for constructing states directly
  void force_answer_phase() { in_answer_phase_ = true; }
  void set_tokens_since_trigger(std::optional<std::size_t> n) { tokens_since_trigger_ = n; }

 private:
  void push_word(std::string raw);
  void feed_text(const std::string& text);
  void detect_phase();

  ControllerConfig config_;
  std::vector<TraceToken> emitted_;
  std::deque<std::string> words_;  // completed, normalized
  std::string partial_;            // raw characters of the word being spelled
  std::string text_;
  std::size_t marker_scan_from_ = 0;
  std::optional<std::size_t> tokens_since_trigger_;
  bool in_answer_phase_ = false;
  std::vector<InjectionEvent> injections_;
  std::size_t budget_ = 0;
  std::size_t budget_used_ = 0;
  bool truncated_ = false;
  std::size_t rr_cursor_ = 0;
  std::mt19937_64 rng_;
};

/// Longest pause phrase ending the rolling suffix, if the session is still
/// thinking, outside the cooldown window and under the injection cap.
std::optional<std::string> should_trigger(const DecodeSession& session, const SuffixMatcher& matcher);
std::optional<std::string> should_trigger(const DecodeSession& session, const miner::PhraseVocabulary& vocab);

/// Picks a template per the session's policy and appends it. Returns the text used.
std::string inject(DecodeSession& session, const std::vector<Template>& templates, const std::string& trigger);

struct BranchingOptions {
  bool enabled = false;
  int branches = 4;  // M
  int horizon = 64;  // H
  std::uint64_t noise_seed = 0;
  std::size_t jobs = 8;
};

struct DecodeRequest {
  std::string question_id;
  std::string question;
  VisualContext context;
  std::string model_id;
  Sampling sampling;  // max_new_tokens is the per-pass budget
  int pass_index = 0;
  BranchingOptions branching;
};

struct DecodeResult {
  ThinkingTrace trace;
  std::optional<std::string> error;
};

/// Streams a generation through the controller: matches pause phrases as
/// tokens arrive, injects lookback templates (optionally exploring branches)
/// and stops at the budget or the natural end. Issues no scoring calls unless
/// branching is enabled.
DecodeResult run_decode(const DecodeRequest& request, const miner::PhraseVocabulary& vocab,
                        const ControllerConfig& config, Backend& backend);

}  // namespace lookback::controller
