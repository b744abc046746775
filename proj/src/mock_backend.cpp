#include "lookback/mock_backend.hpp"

#include <algorithm>

#include "lookback/text.hpp"

namespace lookback {

namespace {

double unit_hash(std::string_view key) {
  return static_cast<double>(text::fnv1a64(key) >> 11) / 9007199254740992.0;
}

}  // namespace

MockScript MockScript::from_json(const nlohmann::json& j) {
  MockScript s;
  try {
    s.model = j.value("model", s.model);
    if (j.contains("streams")) {
      for (const auto& [question, variants] : j.at("streams").items()) {
        s.streams[question] = variants.get<std::vector<std::vector<std::string>>>();
      }
    }
    if (j.contains("score")) {
      for (const auto& [kind, table] : j.at("score").items()) {
        s.score_table[context_kind_from_string(kind)] = table.get<std::map<std::string, double>>();
      }
    }
    if (j.contains("default_logprob")) {
      for (const auto& [kind, lp] : j.at("default_logprob").items()) {
        s.default_logprob[context_kind_from_string(kind)] = lp.get<double>();
      }
    }
    s.stream_logprob = j.value("stream_logprob", s.stream_logprob);
    if (j.contains("disconnect_after")) s.disconnect_after = j.at("disconnect_after").get<int>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("invalid mock script: ") + e.what());
  }
  return s;
}

nlohmann::json MockScript::to_json() const {
  nlohmann::json j{{"model", model}, {"stream_logprob", stream_logprob}};
  j["streams"] = nlohmann::json::object();
  for (const auto& [q, v] : streams) j["streams"][q] = v;
  j["score"] = nlohmann::json::object();
  for (const auto& [k, table] : score_table) j["score"][std::string(to_string(k))] = table;
  if (!default_logprob.empty()) {
    j["default_logprob"] = nlohmann::json::object();
    for (const auto& [k, lp] : default_logprob) j["default_logprob"][std::string(to_string(k))] = lp;
  }
  if (disconnect_after) j["disconnect_after"] = *disconnect_after;
  return j;
}

double MockBackend::logprob_for(const std::string& question, ContextKind kind, std::size_t position,
                                const std::string& token) const {
  if (auto t = script_.score_table.find(kind); t != script_.score_table.end()) {
    if (auto it = t->second.find(token); it != t->second.end()) return it->second;
    if (auto it = t->second.find(text::normalize_phrase(token)); it != t->second.end()) return it->second;
  }
  if (auto d = script_.default_logprob.find(kind); d != script_.default_logprob.end()) return d->second;
  const std::string key = question + '\x1f' + std::to_string(position) + '\x1f' + token;
  double base = -(0.2 + 1.8 * unit_hash(key));
  double jitter = 0.05 * (unit_hash(key + '\x1f' + std::string(to_string(kind))) - 0.5);
  return std::min(0.0, base + jitter);
}

ScoreResponse MockBackend::do_score(const ScoreRequest& req) {
  ScoreResponse resp;
  resp.model_echo = script_.model;
  resp.tokens.reserve(req.continuation.size());
  for (std::size_t i = 0; i < req.continuation.size(); ++i) {
    resp.tokens.push_back({req.continuation[i], logprob_for(req.question, req.context.kind, i, req.continuation[i])});
  }
  return resp;
}

const std::vector<std::string>* MockBackend::pick_stream(const std::string& question, std::int64_t seed) const {
  auto it = script_.streams.find(question);
  if (it == script_.streams.end()) it = script_.streams.find("*");
  if (it == script_.streams.end() || it->second.empty()) return nullptr;
  const auto n = static_cast<std::int64_t>(it->second.size());
  return &it->second[static_cast<std::size_t>(((seed % n) + n) % n)];
}

StreamResult MockBackend::do_generate(const GenerateRequest& req, const TokenSink& sink) {
  StreamResult result;
  const auto* stream = pick_stream(req.question, req.sampling.seed);
  if (!stream) return result;

  std::size_t pos = 0;
  for (const auto& p : req.prefix) {
    if (pos < stream->size() && (*stream)[pos] == p) ++pos;
  }

  int emitted = 0;
  while (pos < stream->size()) {
    if (emitted >= req.sampling.max_new_tokens) {
      result.truncated = true;
      break;
    }
    if (script_.disconnect_after && emitted >= *script_.disconnect_after) {
      throw StreamError("mock stream disconnected after " + std::to_string(emitted) + " tokens", {});
    }
    const auto& tok = (*stream)[pos++];
    ++emitted;
    if (!sink({tok, script_.stream_logprob, emitted})) break;
  }
  return result;
}

}  // namespace lookback
