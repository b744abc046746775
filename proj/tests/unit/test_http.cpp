#include <doctest.h>

#include <atomic>

#include "fuzz.hpp"
#include "lookback/http_backend.hpp"
#include "lookback/jsonl.hpp"
#include "lookback/wire.hpp"
#include "server.hpp"

using namespace lookback;
using wire::json;

namespace {

json cassette(const std::string& name) {
  return json::parse(jsonl::read_file(std::string(LOOKBACK_FIXTURES) + "/cassettes/" + name));
}

HttpBackend client_for(const testing::ScriptedServer& s, int max_retries = 3) {
  HttpBackendOptions o;
  o.base_url = s.url();
  o.auth_token = "secret-token";
  o.retry.max_retries = max_retries;
  o.retry.base_delay = std::chrono::milliseconds(1);
  o.read_timeout_s = 5;
  return HttpBackend(o);
}

void unused(const httplib::Request&, httplib::Response& res) { res.status = 404; }

ScoreRequest three_token_request() {
  return wire::score_request_from_json(cassette("score_three_tokens.json")["request"]);
}

ErrorKind score_error(HttpBackend& b, const ScoreRequest& r) {
  try {
    b.score(r);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("recorded cassette: score replay is byte-identical") {
  const json c = cassette("score_three_tokens.json");
  testing::ScriptedServer server(
      [&](const httplib::Request& req, httplib::Response& res) {
        if (json::parse(req.body) != c["request"]) {
          res.status = 400;
          res.set_content("request does not match cassette", "text/plain");
          return;
        }
        res.set_content(c["response"].dump(), "application/json");
      },
      unused);
  auto b = client_for(server);
  auto resp = b.score(three_token_request());
  REQUIRE(resp.tokens.size() == 3);
  CHECK(wire::to_json(resp).dump() == c["response"].dump());
  CHECK(resp.tokens[1].logprob == -2.3025850929940455);
  CHECK(resp.model_echo == "qwen3-vl-4b-thinking");
  CHECK(server.last_authorization() == "Bearer secret-token");
}

TEST_CASE("recorded cassette: generate stream replay") {
  const json c = cassette("generate_short.json");
  testing::ScriptedServer server(unused, [&](const httplib::Request& req, httplib::Response& res) {
    REQUIRE(json::parse(req.body) == c["request"]);
    std::string body;
    for (const auto& ch : c["chunks"]) body += ch.dump() + "\n";
    res.set_content(body, "application/x-ndjson");
  });
  auto b = client_for(server);
  std::vector<int> counts;
  auto r = b.generate_stream(wire::generate_request_from_json(c["request"]), [&](const StreamToken& t) {
    counts.push_back(t.count);
    return true;
  });
  REQUIRE(r.tokens.size() == 3);
  CHECK(r.tokens[2].text == " three");
  CHECK(r.tokens[2].logprob == -1.75);
  CHECK(counts == std::vector<int>{1, 2, 3});
  CHECK_FALSE(r.truncated);
}

TEST_CASE("transient statuses are retried with backoff") {
  std::atomic<int> n{0};
  const json c = cassette("score_three_tokens.json");
  testing::ScriptedServer server(
      [&](const httplib::Request&, httplib::Response& res) {
        if (n++ < 2) {
          res.status = n == 1 ? 503 : 429;
          return;
        }
        res.set_content(c["response"].dump(), "application/json");
      },
      unused);
  auto b = client_for(server);
  CHECK(b.score(three_token_request()).tokens.size() == 3);
  CHECK(server.score_hits() == 3);
}

TEST_CASE("retries are bounded and report the attempt count") {
  testing::ScriptedServer server([](const httplib::Request&, httplib::Response& res) { res.status = 502; }, unused);
  auto b = client_for(server);
  try {
    b.score(three_token_request());
    FAIL("expected a transport error");
  } catch (const TransportError& e) {
    CHECK(e.retryable());
    CHECK(e.attempts() == 4);
  }
  CHECK(server.score_hits() == 4);
}

TEST_CASE("connection failure is a retryable transport error") {
  HttpBackendOptions o;
  o.base_url = "http://127.0.0.1:1";
  o.retry.max_retries = 1;
  o.retry.base_delay = std::chrono::milliseconds(1);
  o.connect_timeout_s = 1;
  HttpBackend b(o);
  try {
    b.score(three_token_request());
    FAIL("expected a transport error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Transport);
    CHECK(e.retryable());
  }
}

TEST_CASE("malformed responses are non-retryable and never silently accepted") {
  std::string body;
  int status = 200;
  testing::ScriptedServer server(
      [&](const httplib::Request&, httplib::Response& res) {
        res.status = status;
        res.set_content(body, "application/json");
      },
      unused);
  auto b = client_for(server);
  const auto req = three_token_request();

  body = R"({"tokens":[{"text":" a","logprob":-1.0},{"text":" red","logprob":-1.0}]})";
  CHECK(score_error(b, req) == ErrorKind::Protocol);
  CHECK(server.score_hits() == 1);

  body = R"({"tokens":[{"text":" a","logprob":-1.0},{"text":" red","logprob":"NaN"},{"text":" cat","logprob":-1.0}]})";
  CHECK(score_error(b, req) == ErrorKind::DataIntegrity);
  body = R"({"tokens":[{"text":" a","logprob":-1.0},{"text":" red","logprob":null},{"text":" cat","logprob":-1.0}]})";
  CHECK(score_error(b, req) == ErrorKind::DataIntegrity);
  body = R"({"tokens":[{"text":" a","logprob":0.3},{"text":" red","logprob":-1},{"text":" cat","logprob":-1.0}]})";
  CHECK(score_error(b, req) == ErrorKind::DataIntegrity);
  body = "{not json";
  CHECK(score_error(b, req) == ErrorKind::Protocol);
  status = 400;
  body = R"({"error":"bad request"})";
  CHECK(score_error(b, req) == ErrorKind::Protocol);
  CHECK(server.score_hits() == 6);
}

TEST_CASE("generate: mid-stream disconnect carries received tokens") {
  testing::ScriptedServer server(unused, [](const httplib::Request&, httplib::Response& res) {
    res.set_chunked_content_provider("application/x-ndjson", [](size_t, httplib::DataSink& sink) {
      const std::string lines = testing::ndjson_stream({{" one", -0.1}, {" two", -0.2}}, false);
      sink.write(lines.data(), lines.size());
      return false;  // abort without a done chunk
    });
  });
  auto b = client_for(server);
  GenerateRequest g;
  g.model_id = "m";
  g.question = "q";
  g.sampling.max_new_tokens = 16;
  try {
    b.generate_stream(g, {});
    FAIL("expected a stream error");
  } catch (const StreamError& e) {
    CHECK(e.kind() == ErrorKind::Stream);
    CHECK(e.partial().size() == 2);
  }
  CHECK(server.generate_hits() == 1);
}

TEST_CASE("generate: truncation flag, early cancel, malformed chunk, retry before first token") {
  std::atomic<int> calls{0};
  std::string body;
  testing::ScriptedServer server(unused, [&](const httplib::Request&, httplib::Response& res) {
    if (calls++ == 0) {
      res.status = 503;
      return;
    }
    res.set_content(body, "application/x-ndjson");
  });
  auto b = client_for(server);
  GenerateRequest g;
  g.model_id = "m";
  g.question = "q";
  g.sampling.max_new_tokens = 16;

  body = testing::ndjson_stream({{" a", -0.1}, {" b", -0.1}}, true, true);
  auto r = b.generate_stream(g, {});
  CHECK(r.tokens.size() == 2);
  CHECK(r.truncated);
  CHECK(server.generate_hits() == 2);

  body = testing::ndjson_stream({{" a", -0.1}, {" b", -0.1}, {" c", -0.1}});
  auto stopped = b.generate_stream(g, [](const StreamToken& t) { return t.count < 2; });
  CHECK(stopped.tokens.size() == 2);
  CHECK(stopped.cancelled);

  body = testing::ndjson_stream({{" a", -0.1}}, false) + "{\"text\": 5}\n";
  try {
    b.generate_stream(g, {});
    FAIL("expected a protocol error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Protocol);
  }

  body = testing::ndjson_stream({{" a", -0.1}}, false) + "{\"text\":\" b\",\"logprob\":\"NaN\"}\n";
  const int before = server.generate_hits();
  try {
    b.generate_stream(g, {});
    FAIL("expected a data integrity error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DataIntegrity);
  }
  CHECK(server.generate_hits() == before + 1);
}
