#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "lookback/branching.hpp"
#include "lookback/controller.hpp"
#include "lookback/image.hpp"
#include "lookback/mock_backend.hpp"

using namespace lookback;
using namespace lookback::branching;

namespace {

VisualContext real_ctx() {
  std::vector<std::uint8_t> rgb(8 * 8 * 3, 120);
  return VisualContext::real(image::encode_png_rgb(rgb, 8, 8), "image/png", {8, 8});
}

MockScript branch_script(std::vector<std::vector<std::string>> variants) {
  MockScript s;
  s.streams["*"] = std::move(variants);
  s.score_table[ContextKind::Real] = {{"good", -0.1}, {"bad", -3.0}, {"meh", -1.0}};
  s.score_table[ContextKind::Noise] = {{"good", -3.0}, {"bad", -0.1}, {"meh", -1.0}};
  return s;
}

SpawnRequest spawn_req(int m, int h) {
  SpawnRequest r;
  r.model_id = "mock-vlm";
  r.question = "q";
  r.real = real_ctx();
  r.noise = image::make_noise_context(r.real, 3);
  r.prefix = {" so", " Looking back at the image, "};
  r.sampling.seed = 11;
  r.branches = m;
  r.horizon = h;
  r.jobs = 2;
  return r;
}

}  // namespace

TEST_CASE("branch score values") {
  std::vector<double> a{-4.0, -6.0}, b{1.0, 1.0};
  CHECK(branch_score(a) == doctest::Approx(5.0));
  CHECK(branch_score(b) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(branch_score(std::span<const double>{}), Error);
}

TEST_CASE("selection: argmax, tie to lowest seed, empty throws") {
  BranchSet set;
  set.branches = {{7, {}, {}, 1.0, false}, {3, {}, {}, 2.0, false}, {5, {}, {}, 2.0, false}};
  CHECK(select_branch(set) == 1);
  set.branches[2].seed = 1;
  CHECK(select_branch(set) == 2);
  CHECK_THROWS_AS(select_branch(BranchSet{}), Error);
}

TEST_CASE("selection matches brute force and is scale invariant") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int trial = 0; trial < 200; ++trial) {
    BranchSet set;
    const int m = 2 + static_cast<int>(rng() % 6);
    for (int i = 0; i < m; ++i) {
      std::vector<double> d(1 + rng() % 5);
      for (auto& x : d) x = std::round(u(rng));  // rounding forces ties
      set.branches.push_back({static_cast<std::int64_t>(rng() % 100), {}, d, branch_score(d), false});
    }
    std::size_t best = 0;
    for (std::size_t i = 0; i < set.branches.size(); ++i) {
      const auto& b = set.branches[i];
      const auto& c = set.branches[best];
      if (b.score > c.score || (b.score == c.score && b.seed < c.seed)) best = i;
    }
    CHECK(select_branch(set) == best);
    for (auto& b : set.branches) {
      for (auto& x : b.delta_content) x *= 3.0;
      b.score = branch_score(b.delta_content);
    }
    CHECK(select_branch(set) == best);
  }
}

TEST_CASE("seeds are distinct and deterministic") {
  auto s = branch_seeds(11, 40, 6);
  CHECK(s.size() == 6);
  CHECK(std::set<std::int64_t>(s.begin(), s.end()).size() == 6);
  CHECK(s == branch_seeds(11, 40, 6));
  CHECK(s != branch_seeds(11, 41, 6));
}

TEST_CASE("spawn picks the visually grounded branch") {
  MockBackend mock(branch_script({{" good", " good", " good"}, {" bad", " bad", " bad"}}));
  auto set = spawn_branches(spawn_req(4, 3), mock);
  REQUIRE(set.branches.size() == 4);
  CHECK(set.billed_tokens() == 12);
  const auto w = select_branch(set);
  CHECK(set.branches[w].tokens.front().text == " good");
  const double d_good = std::exp(0.1) - std::exp(3.0);
  CHECK(set.branches[w].score == doctest::Approx(-d_good));
  auto log = to_log(set, w);
  CHECK(log.overhead_tokens == 12);
  CHECK(log.winner == w);
}

TEST_CASE("identical branches tie to the lowest seed") {
  MockBackend mock(branch_script({{" meh", " good"}}));
  auto set = spawn_branches(spawn_req(3, 2), mock);
  REQUIRE(set.branches.size() == 3);
  CHECK(set.branches[0].score == set.branches[1].score);
  CHECK(set.branches[1].score == set.branches[2].score);
  std::size_t lowest = 0;
  for (std::size_t i = 1; i < 3; ++i) {
    if (set.branches[i].seed < set.branches[lowest].seed) lowest = i;
  }
  CHECK(select_branch(set) == lowest);
}

TEST_CASE("short branches average over their actual length") {
  MockBackend mock(branch_script({{" good"}, {" meh", " meh", " meh", " meh"}}));
  auto set = spawn_branches(spawn_req(2, 4), mock);
  REQUIRE(set.branches.size() == 2);
  for (const auto& b : set.branches) {
    CHECK(b.delta_content.size() == b.tokens.size());
    CHECK(b.short_branch == (b.tokens.size() < 4));
  }
  CHECK_FALSE(set.warnings.empty());
}

TEST_CASE("branching inside a decode bills every branch token") {
  MockScript s = branch_script({{" hmm", " good", " good", " x"}, {" hmm", " bad", " bad", " x"}});
  MockBackend mock(s);
  miner::PhraseVocabulary vocab;
  vocab.fallback_template = "Looking back at the image, ";
  controller::DecodeRequest req;
  req.question = "q";
  req.model_id = "mock-vlm";
  req.context = real_ctx();
  req.sampling.max_new_tokens = 100;
  req.sampling.seed = 0;
  req.branching.enabled = true;
  req.branching.branches = 3;
  req.branching.horizon = 2;
  auto res = controller::run_decode(req, vocab, {}, mock);
  REQUIRE_FALSE(res.error.has_value());
  REQUIRE(res.trace.branching.size() == 1);
  const auto& log = res.trace.branching[0];
  CHECK(log.branches.size() == 3);
  std::size_t sampled = 0;
  for (const auto& t : res.trace.tokens) sampled += t.injected ? 0 : 1;
  const std::size_t winner_len = log.branches[log.winner].tokens.size();
  CHECK(res.trace.generated_tokens == sampled - winner_len + log.overhead_tokens);
  CHECK(log.branches[log.winner].tokens.front() == " good");
}
