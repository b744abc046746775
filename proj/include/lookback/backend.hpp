#pragma once

/**
 * Backend contract
 *
 * Every stage talks to a generation model only through this interface:
 *  - score():           teacher-forced per-token log-probabilities of a fixed
 *                       continuation after (question, image), natural log.
 *  - generate_stream(): sampled tokens delivered one by one to a sink; the sink
 *                       returns false to stop the stream early.
 *
 * The public entry points validate requests and responses (length law,
 * finiteness, budget) so concrete backends only implement transport.
 */

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "lookback/error.hpp"

namespace lookback {

enum class ContextKind { Real, Noise, Absent };

std::string_view to_string(ContextKind kind);
ContextKind context_kind_from_string(std::string_view s);

struct Resolution {
  int width = 0;
  int height = 0;
  bool operator==(const Resolution&) const = default;
};

struct VisualContext {
  ContextKind kind = ContextKind::Absent;
  std::vector<std::uint8_t> payload;  // encoded image bytes, empty iff Absent
  std::string mime;
  std::optional<Resolution> resolution;

  static VisualContext absent() { return {}; }
  static VisualContext real(std::vector<std::uint8_t> bytes, std::string mime, Resolution res);

  bool operator==(const VisualContext&) const = default;
};

void validate(const VisualContext& ctx);

struct TokenLogprob {
  std::string text;
  double logprob = 0.0;
  bool operator==(const TokenLogprob&) const = default;
};

struct ScoreRequest {
  std::string model_id;
  std::string question;
  VisualContext context;
  std::vector<std::string> continuation;
  bool operator==(const ScoreRequest&) const = default;
};

struct ScoreResponse {
  std::vector<TokenLogprob> tokens;
  std::string model_echo;
  bool operator==(const ScoreResponse&) const = default;
};

struct Sampling {
  double temperature = 0.7;
  double top_p = 0.95;
  std::int64_t seed = 0;
  int max_new_tokens = 16384;
  bool operator==(const Sampling&) const = default;
};

struct GenerateRequest {
  std::string model_id;
  std::string question;
  VisualContext context;
  std::vector<std::string> prefix;
  Sampling sampling;
  bool operator==(const GenerateRequest&) const = default;
};

void validate(const ScoreRequest& req);
void validate(const GenerateRequest& req);

/// Throws Protocol on a length mismatch and DataIntegrity on a logprob that
/// is non-finite or positive.
void validate(const ScoreRequest& req, const ScoreResponse& resp);

struct StreamToken {
  std::string text;
  double logprob = 0.0;
  int count = 0;  // 1-based cumulative count within this stream
};

/// Return false to stop the stream.
using TokenSink = std::function<bool(const StreamToken&)>;

struct StreamResult {
  std::vector<TokenLogprob> tokens;
  bool truncated = false;  // stopped by max_new_tokens
  bool cancelled = false;  // stopped by the sink
};

/// A generation stream that died mid-way, or delivered a token that cannot be
/// trusted (DataIntegrity). Carries whatever arrived before.
class StreamError : public Error {
 public:
  StreamError(const std::string& what, std::vector<TokenLogprob> partial)
      : StreamError(ErrorKind::Stream, what, std::move(partial)) {}
  StreamError(ErrorKind kind, const std::string& what, std::vector<TokenLogprob> partial)
      : Error(kind, what), partial_(std::move(partial)) {}
  const std::vector<TokenLogprob>& partial() const noexcept { return partial_; }

 private:
  std::vector<TokenLogprob> partial_;
};

class Backend {
 public:
  virtual ~Backend() = default;

  ScoreResponse score(const ScoreRequest& req);
  StreamResult generate_stream(const GenerateRequest& req, const TokenSink& sink);

 protected:
  virtual ScoreResponse do_score(const ScoreRequest& req) = 0;
  /// Implementations call `sink` per token and stop when it returns false.
  virtual StreamResult do_generate(const GenerateRequest& req, const TokenSink& sink) = 0;
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{200};
  double multiplier = 2.0;

  std::chrono::milliseconds delay_for(int retry_index) const;
};

enum class CallKind { Score, Generate };

struct CallRecord {
  CallKind kind;
  std::string question;
  ContextKind context = ContextKind::Absent;
  std::size_t prefix_len = 0;  // prefix tokens for generate, continuation length for score
  std::int64_t seed = 0;
};

/// Decorator that logs every call forwarded to an inner backend. A hook may
/// throw before forwarding to simulate faults.
class RecordingBackend : public Backend {
 public:
  using Hook = std::function<void(const CallRecord&, std::size_t call_index)>;

  explicit RecordingBackend(Backend& inner, Hook hook = {}) : inner_(inner), hook_(std::move(hook)) {}

  std::vector<CallRecord> calls() const;
  std::size_t count(CallKind kind) const;
  void clear();

 protected:
  ScoreResponse do_score(const ScoreRequest& req) override;
  StreamResult do_generate(const GenerateRequest& req, const TokenSink& sink) override;

 private:
  void record(CallRecord rec);

  Backend& inner_;
  Hook hook_;
  mutable std::mutex mu_;
  std::vector<CallRecord> calls_;
};

}  // namespace lookback
