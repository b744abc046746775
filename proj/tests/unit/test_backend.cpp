#include <doctest.h>

#include <cmath>
#include <limits>

#include "lookback/backend.hpp"
#include "lookback/mock_backend.hpp"

using namespace lookback;

namespace {

ScoreRequest request_for(std::vector<std::string> continuation) {
  ScoreRequest r;
  r.model_id = "mock-vlm";
  r.question = "q";
  r.continuation = std::move(continuation);
  return r;
}

GenerateRequest generate_for(std::int64_t seed, int max_new) {
  GenerateRequest g;
  g.model_id = "mock-vlm";
  g.question = "q";
  g.sampling.seed = seed;
  g.sampling.max_new_tokens = max_new;
  return g;
}

std::vector<std::string> texts(const StreamResult& r) {
  std::vector<std::string> out;
  for (const auto& t : r.tokens) out.push_back(t.text);
  return out;
}

/// Returns whatever it is told to, to exercise response validation.
class CannedBackend : public Backend {
 public:
  ScoreResponse canned;
  std::vector<StreamToken> stream;
  int score_calls = 0;

 protected:
  ScoreResponse do_score(const ScoreRequest&) override {
    ++score_calls;
    return canned;
  }
  StreamResult do_generate(const GenerateRequest&, const TokenSink& sink) override {
    for (const auto& t : stream) {
      if (!sink(t)) break;
    }
    return {};
  }
};

}  // namespace

TEST_CASE("mock scoring: certainty and scripted table") {
  MockScript s;
  s.default_logprob[ContextKind::Absent] = 0.0;
  s.score_table[ContextKind::Absent]["cat"] = -2.302585;
  MockBackend mock(s);
  auto zero = mock.score(request_for({"x", "y", "z"}));
  REQUIRE(zero.tokens.size() == 3);
  for (const auto& t : zero.tokens) CHECK(t.logprob == 0.0);
  auto cat = mock.score(request_for({"cat"}));
  REQUIRE(cat.tokens.size() == 1);
  CHECK(cat.tokens[0].text == "cat");
  CHECK(cat.tokens[0].logprob == -2.302585);
}

TEST_CASE("mock scoring is a function of the request, not call order") {
  MockBackend mock(MockScript{});
  auto a = mock.score(request_for({" one", " two", " three"}));
  mock.score(request_for({" other"}));
  auto b = mock.score(request_for({" one", " two", " three"}));
  CHECK(a == b);
  for (const auto& t : a.tokens) CHECK((std::isfinite(t.logprob) && t.logprob <= 0.0));
  CHECK(mock.logprob_for("q", ContextKind::Absent, 0, " one") == a.tokens[0].logprob);
}

TEST_CASE("mock streams: echo, budget cutoff, determinism, early stop") {
  MockScript s;
  s.streams["*"] = {{"A", "B", "C"}};
  MockBackend mock(s);
  auto full = mock.generate_stream(generate_for(1, 16), {});
  CHECK(texts(full) == std::vector<std::string>{"A", "B", "C"});
  CHECK_FALSE(full.truncated);

  auto cut = mock.generate_stream(generate_for(1, 2), {});
  CHECK(texts(cut) == std::vector<std::string>{"A", "B"});
  CHECK(cut.truncated);

  CHECK(texts(mock.generate_stream(generate_for(9, 16), {})) == texts(mock.generate_stream(generate_for(9, 16), {})));

  std::vector<int> counts;
  auto stopped = mock.generate_stream(generate_for(1, 16), [&](const StreamToken& t) {
    counts.push_back(t.count);
    return t.text != "B";
  });
  CHECK(texts(stopped) == std::vector<std::string>{"A", "B"});
  CHECK(counts == std::vector<int>{1, 2});
  CHECK(stopped.cancelled);
  CHECK_FALSE(stopped.truncated);
}

TEST_CASE("mock resumes after its prefix, skipping injected text") {
  MockScript s;
  s.streams["*"] = {{" let", " me", " think", " hmm", " the", " answer"}};
  MockBackend mock(s);
  auto g = generate_for(0, 16);
  g.prefix = {" let", " me", " think", " hmm", " Looking back at the image, "};
  CHECK(texts(mock.generate_stream(g, {})) == std::vector<std::string>{" the", " answer"});
}

TEST_CASE("mock disconnect carries the partial stream") {
  MockScript s;
  s.streams["*"] = {{"A", "B", "C", "D"}};
  s.disconnect_after = 2;
  MockBackend mock(s);
  try {
    mock.generate_stream(generate_for(0, 16), {});
    FAIL("expected a stream error");
  } catch (const StreamError& e) {
    CHECK(e.kind() == ErrorKind::Stream);
    REQUIRE(e.partial().size() == 2);
    CHECK(e.partial()[1].text == "B");
    CHECK_FALSE(e.retryable());
  }
}

TEST_CASE("response validation: length law and logprob integrity") {
  CannedBackend b;
  b.canned.tokens = {{"a", -1.0}};
  try {
    b.score(request_for({"a", "b"}));
    FAIL("expected a protocol error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Protocol);
    CHECK_FALSE(e.retryable());
  }
  for (double bad : {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::infinity(),
                     -std::numeric_limits<double>::infinity(), 0.5}) {
    b.canned.tokens = {{"a", bad}};
    try {
      b.score(request_for({"a"}));
      FAIL("expected a data-integrity error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::DataIntegrity);
      CHECK_FALSE(e.retryable());
    }
  }
}

TEST_CASE("request validation") {
  MockBackend mock(MockScript{});
  CHECK_THROWS_AS(mock.score(request_for({})), Error);
  auto g = generate_for(0, 0);
  CHECK_THROWS_AS(mock.generate_stream(g, {}), Error);
  g = generate_for(0, 4);
  g.sampling.top_p = 0.0;
  CHECK_THROWS_AS(mock.generate_stream(g, {}), Error);
  VisualContext broken;
  broken.kind = ContextKind::Noise;
  auto r = request_for({"a"});
  r.context = broken;
  CHECK_THROWS_AS(mock.score(r), Error);
}

TEST_CASE("stream guard enforces the token cap and finiteness") {
  CannedBackend b;
  b.stream = {{"a", -0.1, 1}, {"b", -0.1, 2}, {"c", -0.1, 3}};
  auto r = b.generate_stream(generate_for(0, 2), {});
  CHECK(r.tokens.size() == 2);
  CHECK(r.truncated);
  b.stream = {{"a", -0.1, 1}, {"b", std::numeric_limits<double>::quiet_NaN(), 2}};
  try {
    b.generate_stream(generate_for(0, 8), {});
    FAIL("expected a stream error");
  } catch (const StreamError& e) {
    CHECK(e.kind() == ErrorKind::DataIntegrity);
    CHECK(e.partial().size() == 1);
  }
}

TEST_CASE("recording backend logs calls and lets hooks inject faults") {
  MockScript s;
  s.streams["*"] = {{"A"}};
  MockBackend mock(s);
  RecordingBackend rec(mock, [](const CallRecord& c, std::size_t index) {
    if (c.kind == CallKind::Score && index == 2) throw std::runtime_error("killed");
  });
  rec.score(request_for({"x"}));
  rec.generate_stream(generate_for(5, 4), {});
  CHECK_THROWS(rec.score(request_for({"y"})));
  CHECK(rec.count(CallKind::Score) == 1);
  CHECK(rec.count(CallKind::Generate) == 1);
  CHECK(rec.calls()[1].seed == 5);
}

TEST_CASE("retry delays grow exponentially") {
  RetryPolicy p;
  CHECK(p.delay_for(0).count() == 200);
  CHECK(p.delay_for(1).count() == 400);
  CHECK(p.delay_for(2).count() == 800);
}
