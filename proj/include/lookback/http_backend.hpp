#pragma once

#include <memory>
#include <string>

#include "lookback/backend.hpp"

namespace lookback {

struct HttpBackendOptions {
  std::string base_url;    // e.g. "http://127.0.0.1:8000"
  std::string auth_token;  // sent as "Authorization: Bearer ..." when non-empty
  RetryPolicy retry;
  int connect_timeout_s = 10;
  int read_timeout_s = 600;
};

/// JSON-over-HTTP client for /v1/score and /v1/generate (NDJSON chunks).
/// Transport failures and 429/502/503/504 are retried with exponential
/// backoff; any other non-200 answer or malformed body is a protocol error
/// and is never retried. A generate stream is only retried if it failed
/// before the first token arrived.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpBackendOptions options);
  ~HttpBackend() override;

 protected:
  ScoreResponse do_score(const ScoreRequest& req) override;
  StreamResult do_generate(const GenerateRequest& req, const TokenSink& sink) override;

 private:
  HttpBackendOptions options_;
};

}  // namespace lookback
