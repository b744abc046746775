#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "lookback/error.hpp"
#include "lookback/mock_backend.hpp"
#include "lookback/probe.hpp"

using namespace lookback;
using probe::ProbeRecord;
using probe::StepFlag;

namespace {

ScoreResponse uniform(std::size_t n, double lp) {
  ScoreResponse r;
  for (std::size_t i = 0; i < n; ++i) r.tokens.push_back({"t", lp});
  return r;
}

ProbeRecord rec(double dc, double dp, double pos = 50.0) {
  ProbeRecord r;
  r.question_id = "q";
  r.delta_content = dc;
  r.delta_presence = dp;
  r.norm_pos = pos;
  r.step = 1;
  r.total_steps = 1;
  return r;
}

}  // namespace

TEST_CASE("perplexity is exp of the negated natural-log probability") {
  CHECK(std::abs(probe::perplexity(-std::log(10.0)) - 10.0) <= 1e-12);
  CHECK(probe::perplexity(0.0) == 1.0);
}

TEST_CASE("step perplexities: contrasts and positions") {
  auto t = testing::make_trace("q", {" a", " b", " c", " d"});
  ScoreResponse r = uniform(4, -1.0), n = uniform(4, -3.0), a = uniform(4, -3.0);
  auto recs = probe::step_perplexities(t, r, n, a);
  REQUIRE(recs.size() == 4);
  // exp(1) - exp(3) from an independent high-precision evaluation
  CHECK(std::abs(recs[0].delta_content - (-17.367255094728623)) <= 1e-12);
  CHECK(recs[0].delta_presence == 0.0);
  CHECK(recs[0].norm_pos == 25.0);
  CHECK(recs[3].norm_pos == 100.0);
  for (const auto& x : recs) {
    CHECK(x.delta_content == x.ppl_real - x.ppl_noise);
    CHECK(x.delta_presence == x.ppl_noise - x.ppl_absent);
  }
  auto same = probe::step_perplexities(t, uniform(4, -0.7), uniform(4, -0.7), uniform(4, -2.0));
  for (const auto& x : same) CHECK(x.delta_content == 0.0);
}

TEST_CASE("step perplexities name the misaligned context") {
  auto t = testing::make_trace("q7", {" a", " b"});
  try {
    probe::step_perplexities(t, uniform(2, -1), uniform(3, -1), uniform(2, -1));
    FAIL("expected an alignment error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Alignment);
    CHECK(std::string(e.what()).find("noise") != std::string::npos);
  }
}

TEST_CASE("mock fidelity: records over the mock equal records over its table") {
  MockScript s;
  s.score_table[ContextKind::Real] = {{"a", -1.0}, {"b", -0.5}};
  s.score_table[ContextKind::Noise] = {{"a", -3.0}, {"b", -0.5}};
  s.score_table[ContextKind::Absent] = {{"a", -3.0}, {"b", -2.0}};
  MockBackend mock(s);
  auto t = testing::make_trace("q", {"a", "b"});
  auto ctx = [&](ContextKind k) {
    ScoreRequest req;
    req.model_id = "m";
    req.question = "q";
    req.continuation = t.token_texts();
    if (k != ContextKind::Absent) req.context = VisualContext::real({1}, "image/png", {1, 1});
    req.context.kind = k;
    return mock.score(req);
  };
  auto recs = probe::step_perplexities(t, ctx(ContextKind::Real), ctx(ContextKind::Noise), ctx(ContextKind::Absent));
  CHECK(recs[0].delta_content == std::exp(1.0) - std::exp(3.0));
  CHECK(recs[1].delta_content == 0.0);
  CHECK(recs[1].delta_presence == std::exp(0.5) - std::exp(2.0));
}

TEST_CASE("bins: last bin closed, index bounds") {
  CHECK(probe::bin_index(0.0, 50) == 0);
  CHECK(probe::bin_index(1.99, 50) == 0);
  CHECK(probe::bin_index(2.0, 50) == 1);
  CHECK(probe::bin_index(100.0, 50) == 49);
}

TEST_CASE("aggregation: singleton, symmetry, empty input") {
  std::vector<ProbeRecord> one{rec(-2.0, 1.0, 31.0)};
  auto c = probe::aggregate_delta_curves(one, {false, false}, 10);
  REQUIRE(c.groups.size() == 1);
  const auto& g = c.groups.begin()->second;
  for (std::size_t b = 0; b < 10; ++b) {
    if (b == 3) {
      CHECK(g.content[b].mean == -2.0);
      CHECK(g.presence[b].mean == 1.0);
      CHECK_FALSE(g.content[b].stderr_.has_value());
    } else {
      CHECK_FALSE(g.content[b].mean.has_value());
    }
  }
  std::vector<ProbeRecord> sym{rec(1.0, 0.0, 10.0), rec(-1.0, 0.0, 10.5)};
  auto s = probe::aggregate_delta_curves(sym, {false, false}, 10);
  CHECK(s.groups.begin()->second.content[1].mean == 0.0);
  CHECK_THROWS_AS(probe::aggregate_delta_curves(std::vector<ProbeRecord>{}, {}, 10), Error);
  CHECK_THROWS_AS(probe::aggregate_delta_curves(one, {}, 1), Error);
}

TEST_CASE("aggregation: linear ramp matches a brute-force per-bin average") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::vector<ProbeRecord> recs;
  for (int i = 0; i < 1000; ++i) {
    double pos = u(rng);
    recs.push_back(rec(0.3 * pos - 7.0, -0.1 * pos, pos));
  }
  const int bins = 50;
  auto c = probe::aggregate_delta_curves(recs, {false, false}, bins);
  const auto& g = c.groups.begin()->second;
  std::size_t total = 0;
  for (int b = 0; b < bins; ++b) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : recs) {
      const double lo = 100.0 * b / bins, hi = 100.0 * (b + 1) / bins;
      if (r.norm_pos >= lo && (r.norm_pos < hi || (b == bins - 1 && r.norm_pos <= hi))) {
        sum += r.delta_content;
        ++n;
      }
    }
    CHECK(g.content[static_cast<std::size_t>(b)].n == n);
    total += g.content[static_cast<std::size_t>(b)].n;
    if (n > 0) {
      CHECK(std::abs(*g.content[static_cast<std::size_t>(b)].mean - sum / static_cast<double>(n)) <= 1e-9);
      // the ramp mean over a narrow bin stays near the bin midpoint value
      const double mid = 100.0 * (b + 0.5) / bins;
      CHECK(std::abs(*g.content[static_cast<std::size_t>(b)].mean - (0.3 * mid - 7.0)) <= 0.3);
    }
  }
  CHECK(total == recs.size());
}

TEST_CASE("grouping by correctness and by-step series") {
  std::vector<ProbeRecord> recs{rec(1, 0), rec(2, 0), rec(3, 0)};
  recs[0].correct = true;
  recs[1].correct = false;
  recs[2].step = 2;
  auto c = probe::aggregate_delta_curves(recs, {true, false}, 4);
  CHECK(c.groups.size() == 3);
  auto csv = probe::curves_to_csv(c);
  CHECK(csv.rfind("group,bin_lo,bin_hi,series,mean,stderr,n\n", 0) == 0);
  CHECK(csv.find("delta_content_by_step") != std::string::npos);
  CHECK(csv.find("null") != std::string::npos);
}

TEST_CASE("quantile type 7") {
  CHECK(probe::quantile({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(probe::quantile({1, 2, 3, 4, 5}, 0.9) == doctest::Approx(4.6));
  CHECK(probe::quantile({7}, 0.1) == 7.0);
}

TEST_CASE("flags: definition instance, degenerate, insufficient data") {
  std::vector<ProbeRecord> recs;
  for (int i = 0; i < 200; ++i) recs.push_back(rec(0.05 * (i % 40) - 1.0, 0.02 * (i % 50)));
  // delta_presence at the top percentile, delta_content at the bottom |.| decile
  recs.push_back(rec(0.0, 5.0));
  auto flags = probe::flag_steps(recs);
  CHECK(flags.back() == StepFlag::PresenceSensitive);

  std::vector<ProbeRecord> zeros(150, rec(0.0, 0.0));
  for (auto f : probe::flag_steps(zeros)) CHECK(f == StepFlag::Neutral);

  std::vector<ProbeRecord> few(99, rec(1.0, 1.0));
  try {
    probe::flag_steps(few);
    FAIL("expected insufficient data");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientData);
    CHECK(std::string(e.what()).find("threshold") != std::string::npos);
  }
  // explicit thresholds work on any number of records
  CHECK(probe::flag_steps(few, probe::Thresholds{0.5, 2.0, -1.0})[0] == StepFlag::PresenceSensitive);
}

TEST_CASE("flags: bimodal set equals brute-force re-application of the rule") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> lo(-6.0, 1.0), hi(0.5, 0.4), pres(0.0, 2.0);
  std::vector<ProbeRecord> recs;
  for (int i = 0; i < 2000; ++i) recs.push_back(rec(i % 3 == 0 ? lo(rng) : hi(rng), pres(rng)));
  auto t = probe::quantile_thresholds(recs);
  std::vector<double> ap, ac, c;
  for (const auto& r : recs) {
    ap.push_back(std::abs(r.delta_presence));
    ac.push_back(std::abs(r.delta_content));
    c.push_back(r.delta_content);
  }
  std::sort(ap.begin(), ap.end());
  std::sort(ac.begin(), ac.end());
  std::sort(c.begin(), c.end());
  auto q7 = [](const std::vector<double>& v, double q) {
    double h = (static_cast<double>(v.size()) - 1) * q;
    auto i = static_cast<std::size_t>(std::floor(h));
    return i + 1 < v.size() ? v[i] + (h - static_cast<double>(i)) * (v[i + 1] - v[i]) : v[i];
  };
  CHECK(t.presence_abs == q7(ap, 0.9));
  CHECK(t.content_abs == q7(ac, 0.5));
  CHECK(t.grounded == q7(c, 0.1));
  auto flags = probe::flag_steps(recs);
  std::size_t ps = 0, cg = 0, bps = 0, bcg = 0;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    const bool p = std::abs(r.delta_presence) >= t.presence_abs && std::abs(r.delta_presence) > 0 &&
                   std::abs(r.delta_content) <= t.content_abs;
    const bool g = !p && r.delta_content <= t.grounded && r.delta_content < 0;
    bps += p;
    bcg += g;
    ps += flags[i] == StepFlag::PresenceSensitive;
    cg += flags[i] == StepFlag::ContentGrounded;
  }
  CHECK(ps == bps);
  CHECK(cg == bcg);
  CHECK(ps > 0);
  CHECK(cg > 0);
}

TEST_CASE("probe record json round trip") {
  auto t = testing::make_trace("q", {" a", " b"});
  auto recs = probe::step_perplexities(t, uniform(2, -1.25), uniform(2, -0.5), uniform(2, -2.0));
  for (const auto& r : recs) CHECK(probe::record_from_json(probe::to_json(r)) == r);
}
