#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace lookback {

enum class Phase { Thinking, Answer };
enum class Difficulty { Easy, Medium, Hard, Unknown };

std::string_view to_string(Phase p);
std::string_view to_string(Difficulty d);
Difficulty difficulty_from_string(std::string_view s);

struct TraceToken {
  std::string text;
  double logprob = 0.0;
  Phase phase = Phase::Thinking;
  bool injected = false;  // forced text from the controller, not sampled
  bool operator==(const TraceToken&) const = default;
};

struct InjectionEvent {
  std::size_t position = 0;  // index of the injected token in the trace
  std::string template_text;
  std::string trigger;
  bool operator==(const InjectionEvent&) const = default;
};

struct BranchLogEntry {
  std::int64_t seed = 0;
  std::vector<std::string> tokens;
  std::vector<double> delta_content;
  double score = 0.0;
  bool short_branch = false;  // stopped before the horizon; score averages actual length
  bool operator==(const BranchLogEntry&) const = default;
};

struct BranchLog {
  std::size_t origin_step = 0;
  int horizon = 0;
  std::vector<BranchLogEntry> branches;
  std::size_t winner = 0;
  std::size_t overhead_tokens = 0;  // every branch token is billed
  std::vector<std::string> warnings;
  bool operator==(const BranchLog&) const = default;
};

struct ThinkingTrace {
  std::string question_id;
  int pass_index = 0;
  std::vector<TraceToken> tokens;
  std::optional<bool> correct;
  std::string model_id;
  std::string category;
  Difficulty difficulty = Difficulty::Unknown;

  std::vector<InjectionEvent> injections;
  std::vector<BranchLog> branching;
  bool truncated = false;
  std::string status = "ok";
  std::size_t generated_tokens = 0;  // sampled tokens, including all branch tokens

  std::vector<std::string> token_texts() const;
  std::size_t thinking_token_count() const;
  std::string answer_text() const;
  std::string full_text() const;
};

/// Phase labels monotone (no Thinking after Answer) and at least one token.
void validate(const ThinkingTrace& trace);

nlohmann::json to_json(const ThinkingTrace& trace, bool with_branching = true);
ThinkingTrace trace_from_json(const nlohmann::json& j);

struct Question {
  std::string id;
  std::string text;
  std::string image;  // path, possibly relative to the questions file
  std::string answer;
  std::string category;
  Difficulty difficulty = Difficulty::Unknown;
};

nlohmann::json to_json(const Question& q);
Question question_from_json(const nlohmann::json& j);

}  // namespace lookback
