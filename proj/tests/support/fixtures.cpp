#include "fixtures.hpp"

#include <atomic>
#include <fstream>
#include <random>

#include "lookback/image.hpp"
#include "lookback/jsonl.hpp"
#include "lookback/text.hpp"

namespace lookback::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = fs::temp_directory_path() /
          ("lookback-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

ThinkingTrace make_trace(const std::string& id, const std::vector<std::string>& tokens, bool correct) {
  ThinkingTrace t;
  t.question_id = id;
  t.model_id = "mock-vlm";
  t.correct = correct;
  for (const auto& s : tokens) t.tokens.push_back({s, -0.5, Phase::Thinking, false});
  t.generated_tokens = tokens.size();
  return t;
}

std::vector<std::string> word_tokens(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& w : text::split_words(text)) out.push_back(" " + w);
  return out;
}

namespace {

const std::vector<std::string> kFiller = {
    "the",     "image",   "shows",  "a",       "red",      "circle",  "next",   "to",      "blue",    "square",
    "so",      "area",    "is",     "equal",   "half",     "of",      "total",  "count",   "three",   "lines",
    "angle",   "between", "them",   "must",    "be",       "sixty",   "degrees", "given",  "that",    "value",
    "we",      "compute", "sum",    "first",   "then",     "divide",  "by",     "two",     "which",   "gives",
    "answer",  "option",  "seems",  "likely",  "chart",    "bar",     "height", "label",   "axis",    "left",
    "right",   "top",     "bottom", "corner",  "triangle", "side",    "length", "four",    "five",    "units",
    "check",   "again",   "figure", "region",  "shaded",   "fraction", "ratio", "percent", "scale",   "legend",
    "color",   "green",   "yellow", "point",   "center",   "radius",  "line",   "segment", "parallel", "since",
    "because", "therefore", "thus", "each",    "every",    "other",   "more",   "less",    "than",    "greater",
    "smaller", "larger",  "table",  "row",     "column",   "entry",   "year",   "month",   "growth",  "trend",
    "now",     "consider", "next",  "step",    "follows",  "clearly", "also",   "note",    "first",   "second"};

}  // namespace

PlantedCorpus planted_corpus(std::uint64_t seed, std::size_t target_tokens, const std::string& planted,
                             double background_rate, std::size_t occurrences) {
  PlantedCorpus c;
  c.planted = text::normalize_phrase(planted);
  const auto planted_words = text::split_words(c.planted);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, kFiller.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Decoys keep the planted phrase's proper sub-grams from being as enriched
  // as the phrase itself, so the phrase survives sub-gram deduplication.
  std::vector<std::vector<std::string>> decoys;
  for (std::size_t k = 1; k < planted_words.size(); ++k) {
    std::vector<std::string> tail(planted_words.end() - static_cast<std::ptrdiff_t>(k), planted_words.end());
    decoys.push_back(tail);
  }

  const std::size_t trace_len = 500;
  const std::size_t n_traces = (target_tokens + trace_len - 1) / trace_len;
  const double plant_p = static_cast<double>(occurrences) / static_cast<double>(target_tokens);
  const double decoy_p = plant_p;
  for (std::size_t tr = 0; tr < n_traces; ++tr) {
    std::vector<std::string> toks;
    std::vector<probe::StepFlag> flags;
    while (toks.size() < trace_len) {
      const double r = unit(rng);
      if (r < plant_p && c.planted_occurrences < occurrences) {
        for (std::size_t k = 0; k < planted_words.size(); ++k) {
          toks.push_back(" " + planted_words[k]);
          flags.push_back(k + 1 == planted_words.size() ? probe::StepFlag::PresenceSensitive
                                                        : probe::StepFlag::Neutral);
        }
        ++c.planted_occurrences;
        continue;
      }
      std::vector<std::string> words;
      if (r < plant_p + decoy_p && !decoys.empty()) {
        // a filler word first so the decoy never extends into the planted phrase
        words.push_back(kFiller[pick(rng)]);
        const auto& d = decoys[static_cast<std::size_t>(rng() % decoys.size())];
        words.insert(words.end(), d.begin(), d.end());
      } else {
        words.push_back(kFiller[pick(rng)]);
      }
      for (const auto& w : words) {
        toks.push_back(" " + w);
        const bool f = unit(rng) < background_rate;
        flags.push_back(f ? probe::StepFlag::PresenceSensitive : probe::StepFlag::Neutral);
        ++c.background_tokens;
        if (f) ++c.background_flagged;
      }
    }
    c.traces.push_back(make_trace("q" + std::to_string(tr), toks, true));
    c.flags.push_back(std::move(flags));
    c.tokens += toks.size();
  }
  return c;
}

AlignmentFixture alignment_fixture(std::size_t aligned, std::size_t total) {
  AlignmentFixture f;
  std::vector<std::string> toks;
  std::vector<probe::StepFlag> flags;
  for (std::size_t i = 0; i < total; ++i) {
    for (const char* w : {" the", " figure", " shows"}) {
      toks.push_back(w);
      flags.push_back(probe::StepFlag::Neutral);
    }
    toks.push_back(" hmm,");
    flags.push_back(i < aligned ? probe::StepFlag::PresenceSensitive : probe::StepFlag::Neutral);
  }
  f.traces.push_back(make_trace("align", toks, true));
  f.flags.push_back(std::move(flags));
  f.vocab.fallback_template = std::string(miner::kDefaultTemplate);
  return f;
}

Table3Records table3_records() {
  Table3Records t;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    eval::EvalRecord o;
    o.question_id = "mmmu-" + std::to_string(i);
    o.category = "overall";
    o.difficulty = Difficulty::Medium;
    o.method_id = "original";
    o.correct = i < 670;
    o.total_tokens = 10;
    o.thinking_tokens = 8;
    eval::EvalRecord m = o;
    m.method_id = "lookback";
    m.correct = i < 697;
    // 5,720 of 10,000 tokens: 720 questions with 6 tokens, 280 with 5
    m.total_tokens = i < 720 ? 6 : 5;
    m.thinking_tokens = 4;
    t.original.push_back(o);
    t.ours.push_back(m);
  }
  return t;
}

// ---------------------------------------------------------------------------

MockScript e2e_script() {
  MockScript s;
  s.model = "mock-vlm";
  auto variant = [](int v) {
    std::vector<std::string> out;
    auto add = [&](const std::string& text) {
      for (auto& w : word_tokens(text)) out.push_back(w);
    };
    add("The image shows a bar chart with four bars.");
    add("The tallest bar is labeled B and the shortest is labeled D.");
    if (v % 2 == 0) add("Hmm, the axis starts at zero so heights compare directly.");
    else add("Wait, the axis might not start at zero.");
    add("Looking back at the diagram, bar B reaches the top gridline.");
    add("Comparing the remaining bars carefully one by one gives the same order.");
    if (v == 1) add("Hmm, let me check the legend colors once more.");
    if (v == 2) add("Wait, the values were read from the right axis instead.");
    add("Looking back at the diagram, the legend confirms the labels.");
    add("So the tallest bar corresponds to option B in the list.");
    out.push_back(" </think>");
    add("Final Answer:");
    out.push_back(v == 3 ? " (C)" : " (B)");
    return out;
  };
  for (int v = 0; v < 4; ++v) s.streams["*"].push_back(variant(v));
  for (const char* w : {"hmm", "wait"}) {
    s.score_table[ContextKind::Real][w] = -0.1;
    s.score_table[ContextKind::Noise][w] = -0.1;
    s.score_table[ContextKind::Absent][w] = -3.5;
  }
  for (const char* w : {"looking", "back", "at", "diagram"}) {
    s.score_table[ContextKind::Real][w] = -0.05;
    s.score_table[ContextKind::Noise][w] = -3.0;
  }
  return s;
}

E2EFixture write_e2e_fixture(const fs::path& dir, std::size_t questions, int passes) {
  fs::create_directories(dir / "images");
  E2EFixture f;
  f.questions = questions;
  f.mock_path = (dir / "mock_script.json").string();
  jsonl::write_file_atomic(f.mock_path, e2e_script().to_json().dump(2) + "\n");

  const char* cats[] = {"Science", "Art", "Business", "Health"};
  const char* diffs[] = {"easy", "medium", "hard"};
  std::string qlines;
  for (std::size_t i = 0; i < questions; ++i) {
    const int w = 8 + static_cast<int>(i % 5), h = 6 + static_cast<int>(i % 3);
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w * h * 3));
    for (std::size_t k = 0; k < rgb.size(); ++k) rgb[k] = static_cast<std::uint8_t>((k * 7 + i * 31) & 0xff);
    const std::string img = "images/q" + std::to_string(i) + ".png";
    auto png = image::encode_png_rgb(rgb, w, h);
    std::ofstream((dir / img).string(), std::ios::binary)
        .write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
    nlohmann::json q{{"id", "q" + std::to_string(i)},
                     {"text", "Which bar is tallest in chart " + std::to_string(i) + "?"},
                     {"image", img},
                     {"answer", i % 4 == 3 ? "C" : "B"},
                     {"category", cats[i % 4]},
                     {"difficulty", diffs[i % 3]}};
    qlines += q.dump() + "\n";
  }
  jsonl::write_file_atomic((dir / "questions.jsonl").string(), qlines);

  f.config_path = (dir / "run.toml").string();
  const std::string cfg =
      "# end-to-end fixture run\n"
      "[backend]\n"
      "base_url = \"mock://mock_script.json\"\n"
      "model_id = \"mock-vlm\"\n"
      "in_flight = 4\n\n"
      "[sampling]\n"
      "n_passes = " + std::to_string(passes) + "\n"
      "seed = 7\n\n"
      "[budgets]\n"
      "thinking_max = 4096\n\n"
      "[controller]\n"
      "cooldown_window = 16\n\n"
      "[paths]\n"
      "questions = \"questions.jsonl\"\n"
      "traces = \"out/traces.jsonl\"\n"
      "probe_records = \"out/probe_records.jsonl\"\n"
      "curves = \"out/curves.csv\"\n"
      "vocab = \"out/vocab.json\"\n"
      "eval_records = \"out/eval_records.jsonl\"\n"
      "reports = \"out/reports\"\n"
      "work = \"out/work\"\n";
  jsonl::write_file_atomic(f.config_path, cfg);
  return f;
}

}  // namespace lookback::testing
