#include "lookback/http_backend.hpp"

#include <thread>

#include <httplib.h>

#include "lookback/wire.hpp"

namespace lookback {

namespace {

bool retryable_status(int status) { return status == 429 || status == 502 || status == 503 || status == 504; }

httplib::Headers make_headers(const HttpBackendOptions& o) {
  httplib::Headers h;
  if (!o.auth_token.empty()) h.emplace("Authorization", "Bearer " + o.auth_token);
  return h;
}

std::unique_ptr<httplib::Client> make_client(const HttpBackendOptions& o) {
  auto cli = std::make_unique<httplib::Client>(o.base_url);
  require(cli->is_valid(), ErrorKind::Config, "invalid backend base URL '" + o.base_url + "'");
  cli->set_connection_timeout(o.connect_timeout_s, 0);
  cli->set_read_timeout(o.read_timeout_s, 0);
  cli->set_keep_alive(false);
  return cli;
}

std::string snippet(const std::string& body) { return body.size() > 200 ? body.substr(0, 200) + "..." : body; }

}  // namespace

HttpBackend::HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {
  require(!options_.base_url.empty(), ErrorKind::Config, "backend base URL is empty");
  make_client(options_);  // validates the URL eagerly
}

HttpBackend::~HttpBackend() = default;

ScoreResponse HttpBackend::do_score(const ScoreRequest& req) {
  const std::string body = wire::to_json(req).dump();
  std::string last_error;
  const int attempts_allowed = options_.retry.max_retries + 1;
  for (int attempt = 1; attempt <= attempts_allowed; ++attempt) {
    if (attempt > 1) std::this_thread::sleep_for(options_.retry.delay_for(attempt - 2));
    auto cli = make_client(options_);
    auto res = cli->Post("/v1/score", make_headers(options_), body, "application/json");
    if (!res) {
      last_error = "POST /v1/score failed: " + httplib::to_string(res.error());
      continue;
    }
    if (retryable_status(res->status)) {
      last_error = "POST /v1/score returned HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      fail(ErrorKind::Protocol,
           "POST /v1/score returned HTTP " + std::to_string(res->status) + ": " + snippet(res->body));
    }
    wire::json parsed;
    try {
      parsed = wire::json::parse(res->body);
    } catch (const wire::json::exception& e) {
      fail(ErrorKind::Protocol, std::string("unparseable /v1/score body: ") + e.what());
    }
    return wire::score_response_from_json(parsed);
  }
  throw TransportError(last_error, attempts_allowed);
}

StreamResult HttpBackend::do_generate(const GenerateRequest& req, const TokenSink& sink) {
  const std::string body = wire::to_json(req).dump();
  std::string last_error;
  const int attempts_allowed = options_.retry.max_retries + 1;

  for (int attempt = 1; attempt <= attempts_allowed; ++attempt) {
    if (attempt > 1) std::this_thread::sleep_for(options_.retry.delay_for(attempt - 2));

    StreamResult result;
    std::vector<TokenLogprob> received;
    std::string pending;
    std::string error_body;
    int status = 0;
    bool done = false;
    bool stopped = false;
    std::optional<Error> parse_error;

    auto handle_line = [&](std::string_view line) -> bool {
      if (line.empty()) return true;
      wire::StreamChunk chunk;
      try {
        chunk = wire::stream_chunk_from_json(wire::json::parse(line));
      } catch (const wire::json::exception& e) {
        parse_error = Error(ErrorKind::Protocol, std::string("malformed stream chunk: ") + e.what());
        return false;
      } catch (const Error& e) {
        parse_error = e;
        return false;
      }
      if (const auto* d = std::get_if<wire::DoneChunk>(&chunk)) {
        done = true;
        result.truncated = d->truncated;
        return false;
      }
      const auto& t = std::get<wire::TokenChunk>(chunk);
      received.push_back({t.text, t.logprob});
      bool more = true;
      try {
        more = sink({t.text, t.logprob, static_cast<int>(received.size())});
      } catch (const Error& e) {
        parse_error = e;
        return false;
      }
      if (!more) {
        stopped = true;
        return false;
      }
      return true;
    };

    httplib::Request hreq;
    hreq.method = "POST";
    hreq.path = "/v1/generate";
    hreq.headers = make_headers(options_);
    hreq.headers.emplace("Accept", "application/x-ndjson");
    hreq.body = body;
    hreq.set_header("Content-Type", "application/json");
    hreq.response_handler = [&](const httplib::Response& r) {
      status = r.status;
      return true;
    };
    hreq.content_receiver = [&](const char* data, size_t len, uint64_t, uint64_t) {
      if (status != 200) {
        error_body.append(data, len);
        return true;
      }
      pending.append(data, len);
      std::size_t nl;
      while ((nl = pending.find('\n')) != std::string::npos) {
        std::string line = pending.substr(0, nl);
        pending.erase(0, nl + 1);
        if (!handle_line(line)) return false;
      }
      return true;
    };

    auto cli = make_client(options_);
    httplib::Response hres;
    httplib::Error err = httplib::Error::Success;
    bool ok = cli->send(hreq, hres, err);

    if (parse_error) throw StreamError(parse_error->kind(), parse_error->what(), received);
    if (stopped || done) return result;
    if (ok && status == 200 && !pending.empty() && handle_line(pending)) {
      pending.clear();
    }
    if (done || stopped) return result;

    if (status != 0 && status != 200) {
      if (retryable_status(status)) {
        last_error = "POST /v1/generate returned HTTP " + std::to_string(status);
        continue;
      }
      fail(ErrorKind::Protocol,
           "POST /v1/generate returned HTTP " + std::to_string(status) + ": " + snippet(error_body));
    }
    if (!received.empty()) {
      throw StreamError("generate stream ended after " + std::to_string(received.size()) +
                            " token(s) without a done chunk (" + httplib::to_string(err) + ")",
                        received);
    }
    last_error = ok ? std::string("generate stream closed before any token")
                    : "POST /v1/generate failed: " + httplib::to_string(err);
  }
  throw TransportError(last_error, attempts_allowed);
}

}  // namespace lookback
