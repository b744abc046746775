#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lookback/backend.hpp"

namespace lookback {

/// Scripted, deterministic backend for tests and dry runs.
///
/// Generation: the stream for a request is chosen by question text (falling
/// back to "*"), then by variant = seed mod #variants. The prefix is matched
/// greedily as a subsequence of the variant so a request resumes right after
/// the scripted tokens it already contains; injected text that is not part of
/// the script is skipped over.
///
/// Scoring: logprobs come from a per-context token table, then a per-context
/// default, then a hash of (question, position, token, context). Results depend
/// only on the request, never on call order.
struct MockScript {
  std::string model = "mock-vlm";
  std::map<std::string, std::vector<std::vector<std::string>>> streams;
  std::map<ContextKind, std::map<std::string, double>> score_table;
  std::map<ContextKind, double> default_logprob;
  double stream_logprob = -0.25;
  // Throw a StreamError after this many tokens of every stream.
  std::optional<int> disconnect_after;

  static MockScript from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

class MockBackend : public Backend {
 public:
  explicit MockBackend(MockScript script) : script_(std::move(script)) {}

  const MockScript& script() const { return script_; }

  /// The logprob the mock assigns to `token` at `position` under `kind`.
  double logprob_for(const std::string& question, ContextKind kind, std::size_t position,
                     const std::string& token) const;

 protected:
  ScoreResponse do_score(const ScoreRequest& req) override;
  StreamResult do_generate(const GenerateRequest& req, const TokenSink& sink) override;

 private:
  const std::vector<std::string>* pick_stream(const std::string& question, std::int64_t seed) const;

  MockScript script_;
};

}  // namespace lookback
