#include "lookback/backend.hpp"

#include <cmath>

namespace lookback {

std::string_view to_string(ContextKind kind) {
  switch (kind) {
    case ContextKind::Real: return "real";
    case ContextKind::Noise: return "noise";
    case ContextKind::Absent: return "absent";
  }
  return "absent";
}

ContextKind context_kind_from_string(std::string_view s) {
  if (s == "real") return ContextKind::Real;
  if (s == "noise") return ContextKind::Noise;
  if (s == "absent") return ContextKind::Absent;
  fail(ErrorKind::Protocol, "unknown image kind '" + std::string(s) + "'");
}

VisualContext VisualContext::real(std::vector<std::uint8_t> bytes, std::string mime, Resolution res) {
  VisualContext ctx;
  ctx.kind = ContextKind::Real;
  ctx.payload = std::move(bytes);
  ctx.mime = std::move(mime);
  ctx.resolution = res;
  validate(ctx);
  return ctx;
}

void validate(const VisualContext& ctx) {
  if (ctx.kind == ContextKind::Absent) {
    require(ctx.payload.empty(), ErrorKind::Precondition, "absent visual context must not carry an image payload");
    return;
  }
  require(!ctx.payload.empty(), ErrorKind::Precondition,
          std::string(to_string(ctx.kind)) + " visual context requires an image payload");
  require(ctx.resolution && ctx.resolution->width > 0 && ctx.resolution->height > 0, ErrorKind::Precondition,
          std::string(to_string(ctx.kind)) + " visual context requires a positive resolution");
}

void validate(const ScoreRequest& req) {
  validate(req.context);
  require(!req.continuation.empty(), ErrorKind::Precondition, "score request needs a non-empty continuation");
}

void validate(const GenerateRequest& req) {
  validate(req.context);
  require(req.sampling.max_new_tokens > 0, ErrorKind::Precondition, "max_new_tokens must be positive");
  require(req.sampling.top_p > 0.0 && req.sampling.top_p <= 1.0, ErrorKind::Precondition, "top_p must lie in (0, 1]");
  require(req.sampling.temperature >= 0.0, ErrorKind::Precondition, "temperature must be non-negative");
}

void validate(const ScoreRequest& req, const ScoreResponse& resp) {
  if (resp.tokens.size() != req.continuation.size()) {
    fail(ErrorKind::Protocol, "score response has " + std::to_string(resp.tokens.size()) + " logprobs for a " +
                                  std::to_string(req.continuation.size()) + "-token continuation");
  }
  for (std::size_t i = 0; i < resp.tokens.size(); ++i) {
    double lp = resp.tokens[i].logprob;
    if (!std::isfinite(lp) || lp > 0.0) {
      fail(ErrorKind::DataIntegrity, "logprob at position " + std::to_string(i) + " is " + std::to_string(lp) +
                                         "; expected a finite value <= 0");
    }
  }
}

ScoreResponse Backend::score(const ScoreRequest& req) {
  validate(req);
  auto resp = do_score(req);
  validate(req, resp);
  return resp;
}

StreamResult Backend::generate_stream(const GenerateRequest& req, const TokenSink& sink) {
  validate(req);
  const int limit = req.sampling.max_new_tokens;
  int seen = 0;
  bool over_limit = false;
  bool sink_stopped = false;
  std::vector<TokenLogprob> received;
  TokenSink guarded = [&](const StreamToken& tok) {
    if (seen >= limit) {
      // backend ignored the cap; drop the excess and report a cutoff
      over_limit = true;
      return false;
    }
    if (!std::isfinite(tok.logprob) || tok.logprob > 0.0) {
      throw StreamError(ErrorKind::DataIntegrity,
                        "non-finite or positive logprob in stream at token " + std::to_string(seen + 1), received);
    }
    ++seen;
    received.push_back({tok.text, tok.logprob});
    StreamToken numbered = tok;
    numbered.count = seen;
    bool more = sink ? sink(numbered) : true;
    if (!more) sink_stopped = true;
    return more;
  };
  StreamResult result;
  try {
    result = do_generate(req, guarded);
  } catch (const StreamError& e) {
    throw StreamError(e.kind(), e.what(), received);
  }
  result.tokens = std::move(received);
  result.cancelled = sink_stopped;
  if (over_limit) result.truncated = true;
  if (sink_stopped) result.truncated = false;
  return result;
}

std::chrono::milliseconds RetryPolicy::delay_for(int retry_index) const {
  double ms = static_cast<double>(base_delay.count()) * std::pow(multiplier, retry_index);
  return std::chrono::milliseconds(static_cast<long long>(ms));
}

std::vector<CallRecord> RecordingBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::size_t RecordingBackend::count(CallKind kind) const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& c : calls_) n += c.kind == kind ? 1 : 0;
  return n;
}

void RecordingBackend::clear() {
  std::lock_guard lock(mu_);
  calls_.clear();
}

void RecordingBackend::record(CallRecord rec) {
  std::size_t index = 0;
  {
    std::lock_guard lock(mu_);
    index = calls_.size();
  }
  if (hook_) hook_(rec, index);
  std::lock_guard lock(mu_);
  calls_.push_back(std::move(rec));
}

ScoreResponse RecordingBackend::do_score(const ScoreRequest& req) {
  record({CallKind::Score, req.question, req.context.kind, req.continuation.size(), 0});
  return inner_.score(req);
}

StreamResult RecordingBackend::do_generate(const GenerateRequest& req, const TokenSink& sink) {
  record({CallKind::Generate, req.question, req.context.kind, req.prefix.size(), req.sampling.seed});
  return inner_.generate_stream(req, sink);
}

}  // namespace lookback
