#include "fuzz.hpp"

#include <cmath>
#include <limits>

namespace lookback::testing {

namespace {

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

}  // namespace

std::string WireFuzzer::text(std::size_t max_len) {
  const std::size_t n = rng_() % (max_len + 1);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    switch (rng_() % 6) {
      case 0: out.push_back(static_cast<char>(rng_() % 0x20)); break;  // control chars
      case 1: out.push_back("\"\\/ \t\n{}[]:,"[rng_() % 12]); break;
      case 2: append_utf8(out, static_cast<char32_t>(0x80 + rng_() % 0x780)); break;
      case 3: append_utf8(out, static_cast<char32_t>(0xE000 + rng_() % 0x1000)); break;
      case 4: append_utf8(out, static_cast<char32_t>(0x1F300 + rng_() % 0x300)); break;
      default: out.push_back(static_cast<char>(0x20 + rng_() % 0x5F)); break;
    }
  }
  return out;
}

double WireFuzzer::logprob() {
  switch (rng_() % 5) {
    case 0: return 0.0;
    case 1: return -std::numeric_limits<double>::denorm_min();
    case 2: return -std::ldexp(static_cast<double>(rng_() >> 11), -static_cast<int>(rng_() % 80));
    case 3: return -static_cast<double>(rng_() % 1000);
    default: return -20.0 * std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
  }
}

VisualContext WireFuzzer::context() {
  VisualContext c;
  switch (rng_() % 3) {
    case 0: return c;
    case 1: c.kind = ContextKind::Real; break;
    default: c.kind = ContextKind::Noise; break;
  }
  const std::size_t n = 1 + rng_() % 40;
  for (std::size_t i = 0; i < n; ++i) c.payload.push_back(static_cast<std::uint8_t>(rng_()));
  c.mime = rng_() % 2 ? "image/png" : "image/jpeg";
  c.resolution = Resolution{1 + static_cast<int>(rng_() % 4096), 1 + static_cast<int>(rng_() % 4096)};
  return c;
}

ScoreRequest WireFuzzer::score_request() {
  ScoreRequest r;
  r.model_id = text(12);
  r.question = text(40);
  r.context = context();
  const std::size_t n = 1 + rng_() % 8;
  for (std::size_t i = 0; i < n; ++i) r.continuation.push_back(text(6));
  return r;
}

ScoreResponse WireFuzzer::score_response() {
  ScoreResponse r;
  r.model_echo = text(12);
  const std::size_t n = rng_() % 8;
  for (std::size_t i = 0; i < n; ++i) r.tokens.push_back({text(6), logprob()});
  return r;
}

GenerateRequest WireFuzzer::generate_request() {
  GenerateRequest r;
  r.model_id = text(12);
  r.question = text(40);
  r.context = context();
  const std::size_t n = rng_() % 6;
  for (std::size_t i = 0; i < n; ++i) r.prefix.push_back(text(6));
  r.sampling.temperature = std::uniform_real_distribution<double>(0.0, 2.0)(rng_);
  r.sampling.top_p = std::uniform_real_distribution<double>(0.01, 1.0)(rng_);
  r.sampling.seed = static_cast<std::int64_t>(rng_());
  r.sampling.max_new_tokens = 1 + static_cast<int>(rng_() % 100000);
  return r;
}

wire::StreamChunk WireFuzzer::chunk() {
  if (rng_() % 4 == 0) return wire::DoneChunk{rng_() % 2 == 0};
  return wire::TokenChunk{text(8), logprob()};
}

RoundTripResult wire_round_trips(std::uint64_t seed, std::size_t count) {
  using wire::json;
  WireFuzzer fz(seed);
  RoundTripResult res;
  auto check = [&](bool ok, const std::string& what) {
    ++res.checked;
    if (!ok) {
      if (res.failures == 0) res.first_failure = what;
      ++res.failures;
    }
  };
  for (std::size_t i = 0; i < count; ++i) {
    try {
      switch (i % 5) {
        case 0: {
          auto m = fz.score_request();
          auto line = wire::to_json(m).dump();
          check(wire::score_request_from_json(json::parse(line)) == m, line);
          break;
        }
        case 1: {
          auto m = fz.score_response();
          auto line = wire::to_json(m).dump();
          check(wire::score_response_from_json(json::parse(line)) == m, line);
          break;
        }
        case 2: {
          auto m = fz.generate_request();
          auto line = wire::to_json(m).dump();
          check(wire::generate_request_from_json(json::parse(line)) == m, line);
          break;
        }
        default: {
          auto m = fz.chunk();
          auto line = wire::encode_chunk_line(m);
          bool ok = !line.empty() && line.back() == '\n' && line.find('\n') == line.size() - 1;
          ok = ok && wire::stream_chunk_from_json(json::parse(line)) == m;
          check(ok, line);
          break;
        }
      }
    } catch (const std::exception& e) {
      check(false, std::string("exception: ") + e.what());
    }
  }
  return res;
}

}  // namespace lookback::testing
