#pragma once

// JSON wire format for POST /v1/score and POST /v1/generate.

#include <json.hpp>
#include <string>
#include <variant>

#include "lookback/backend.hpp"

namespace lookback::wire {

using json = nlohmann::json;

json to_json(const VisualContext& ctx);
VisualContext context_from_json(const json& j);

json to_json(const ScoreRequest& req);
ScoreRequest score_request_from_json(const json& j);

json to_json(const ScoreResponse& resp);
ScoreResponse score_response_from_json(const json& j);

json to_json(const GenerateRequest& req);
GenerateRequest generate_request_from_json(const json& j);

struct TokenChunk {
  std::string text;
  double logprob = 0.0;
  bool operator==(const TokenChunk&) const = default;
};

struct DoneChunk {
  bool truncated = false;
  bool operator==(const DoneChunk&) const = default;
};

using StreamChunk = std::variant<TokenChunk, DoneChunk>;

json to_json(const StreamChunk& chunk);
StreamChunk stream_chunk_from_json(const json& j);

/// One NDJSON line per chunk in the streamed /v1/generate body.
std::string encode_chunk_line(const StreamChunk& chunk);

/// Accepts numbers and the "NaN"/"Infinity"/"-Infinity" strings some servers
/// emit, so non-finite values reach validation instead of failing to parse.
double logprob_from_json(const json& j);

}  // namespace lookback::wire
