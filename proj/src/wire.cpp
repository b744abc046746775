#include "lookback/wire.hpp"

#include <limits>

#include "lookback/text.hpp"

namespace lookback::wire {

namespace {

const json& field(const json& j, const char* key) {
  require(j.is_object(), ErrorKind::Protocol, "expected a JSON object");
  auto it = j.find(key);
  require(it != j.end(), ErrorKind::Protocol, std::string("missing field '") + key + "'");
  return *it;
}

template <typename T>
T get(const json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Protocol, std::string("bad field '") + key + "': " + e.what());
  }
}

std::vector<std::string> string_list(const json& j, const char* key) {
  const json& arr = field(j, key);
  require(arr.is_array(), ErrorKind::Protocol, std::string("field '") + key + "' must be an array");
  std::vector<std::string> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    require(v.is_string(), ErrorKind::Protocol, std::string("field '") + key + "' must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

double logprob_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s == "NaN" || s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "Infinity" || s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-Infinity" || s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  fail(ErrorKind::Protocol, "logprob must be a number");
}

json to_json(const VisualContext& ctx) {
  json j{{"kind", to_string(ctx.kind)}};
  if (ctx.kind != ContextKind::Absent) {
    j["data"] = text::base64_encode(ctx.payload);
    j["mime"] = ctx.mime;
  }
  if (ctx.resolution) {
    j["width"] = ctx.resolution->width;
    j["height"] = ctx.resolution->height;
  }
  return j;
}

VisualContext context_from_json(const json& j) {
  VisualContext ctx;
  ctx.kind = context_kind_from_string(get<std::string>(j, "kind"));
  if (j.contains("data")) ctx.payload = text::base64_decode(get<std::string>(j, "data"));
  if (j.contains("mime")) ctx.mime = get<std::string>(j, "mime");
  if (j.contains("width") || j.contains("height")) {
    ctx.resolution = Resolution{get<int>(j, "width"), get<int>(j, "height")};
  }
  return ctx;
}

json to_json(const ScoreRequest& req) {
  return json{{"model", req.model_id},
              {"question", req.question},
              {"image", to_json(req.context)},
              {"continuation", req.continuation}};
}

ScoreRequest score_request_from_json(const json& j) {
  ScoreRequest req;
  req.model_id = get<std::string>(j, "model");
  req.question = get<std::string>(j, "question");
  req.context = context_from_json(field(j, "image"));
  req.continuation = string_list(j, "continuation");
  return req;
}

json to_json(const ScoreResponse& resp) {
  json tokens = json::array();
  for (const auto& t : resp.tokens) tokens.push_back({{"text", t.text}, {"logprob", t.logprob}});
  json j{{"tokens", std::move(tokens)}};
  if (!resp.model_echo.empty()) j["model"] = resp.model_echo;
  return j;
}

ScoreResponse score_response_from_json(const json& j) {
  ScoreResponse resp;
  const json& tokens = field(j, "tokens");
  require(tokens.is_array(), ErrorKind::Protocol, "field 'tokens' must be an array");
  resp.tokens.reserve(tokens.size());
  for (const auto& t : tokens) {
    resp.tokens.push_back({get<std::string>(t, "text"), logprob_from_json(field(t, "logprob"))});
  }
  if (j.contains("model")) resp.model_echo = get<std::string>(j, "model");
  return resp;
}

json to_json(const GenerateRequest& req) {
  return json{{"model", req.model_id},
              {"question", req.question},
              {"image", to_json(req.context)},
              {"prefix", req.prefix},
              {"temperature", req.sampling.temperature},
              {"top_p", req.sampling.top_p},
              {"seed", req.sampling.seed},
              {"max_new_tokens", req.sampling.max_new_tokens}};
}

GenerateRequest generate_request_from_json(const json& j) {
  GenerateRequest req;
  req.model_id = get<std::string>(j, "model");
  req.question = get<std::string>(j, "question");
  req.context = context_from_json(field(j, "image"));
  req.prefix = string_list(j, "prefix");
  req.sampling.temperature = get<double>(j, "temperature");
  req.sampling.top_p = get<double>(j, "top_p");
  req.sampling.seed = get<std::int64_t>(j, "seed");
  req.sampling.max_new_tokens = get<int>(j, "max_new_tokens");
  return req;
}

json to_json(const StreamChunk& chunk) {
  if (const auto* t = std::get_if<TokenChunk>(&chunk)) return json{{"text", t->text}, {"logprob", t->logprob}};
  return json{{"done", true}, {"truncated", std::get<DoneChunk>(chunk).truncated}};
}

StreamChunk stream_chunk_from_json(const json& j) {
  require(j.is_object(), ErrorKind::Protocol, "stream chunk must be a JSON object");
  if (j.contains("done")) {
    require(get<bool>(j, "done"), ErrorKind::Protocol, "'done' chunk must carry done: true");
    return DoneChunk{j.contains("truncated") ? get<bool>(j, "truncated") : false};
  }
  if (j.contains("error")) fail(ErrorKind::Stream, "server reported stream error: " + j["error"].dump());
  return TokenChunk{get<std::string>(j, "text"), logprob_from_json(field(j, "logprob"))};
}

std::string encode_chunk_line(const StreamChunk& chunk) { return to_json(chunk).dump() + "\n"; }

}  // namespace lookback::wire
