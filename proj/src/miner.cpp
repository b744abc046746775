#include "lookback/miner.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

#include "lookback/error.hpp"
#include "lookback/parallel.hpp"
#include "lookback/text.hpp"

namespace lookback::miner {

using nlohmann::json;

std::vector<std::string> PhraseVocabulary::trigger_phrases() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& p : pause_phrases) {
    if (seen.insert(p.text).second) out.push_back(p.text);
  }
  for (const auto& m : seed_markers) {
    auto norm = text::normalize_phrase(m);
    if (!norm.empty() && seen.insert(norm).second) out.push_back(norm);
  }
  return out;
}

std::vector<std::string> PhraseVocabulary::injection_texts() const {
  std::vector<std::string> out;
  for (const auto& t : lookback_templates) out.push_back(t.injection.empty() ? text::render_template(t.text) : t.injection);
  if (out.empty() && !fallback_template.empty()) out.push_back(fallback_template);
  return out;
}

namespace {

json entry_to_json(const PhraseEntry& e, bool with_injection) {
  json j{{"text", e.text},
         {"n", e.n},
         {"enrichment", e.enrichment},
         {"support", e.support},
         {"occurrences", e.occurrences}};
  if (with_injection) j["injection"] = e.injection;
  return j;
}

PhraseEntry entry_from_json(const json& j) {
  PhraseEntry e;
  e.text = text::normalize_phrase(j.at("text").get<std::string>());
  e.n = j.value("n", static_cast<int>(text::split_words(e.text).size()));
  e.enrichment = j.value("enrichment", 1.0);
  e.support = j.value("support", std::size_t{0});
  e.occurrences = j.value("occurrences", e.support);
  e.injection = j.value("injection", std::string{});
  return e;
}

json params_to_json(const MiningParams& p) {
  return json{{"n_min", p.n_min}, {"n_max", p.n_max}, {"min_support", p.min_support},
              {"min_enrichment", p.min_enrichment}};
}

MiningParams params_from_json(const json& j, MiningParams fallback) {
  fallback.n_min = j.value("n_min", fallback.n_min);
  fallback.n_max = j.value("n_max", fallback.n_max);
  fallback.min_support = j.value("min_support", fallback.min_support);
  fallback.min_enrichment = j.value("min_enrichment", fallback.min_enrichment);
  return fallback;
}

}  // namespace

json to_json(const PhraseVocabulary& v) {
  json pause = json::array(), templates = json::array();
  for (const auto& e : v.pause_phrases) pause.push_back(entry_to_json(e, false));
  for (const auto& e : v.lookback_templates) templates.push_back(entry_to_json(e, true));
  json prov{{"thresholds", probe::to_json(v.provenance.thresholds)},
            {"pause_params", params_to_json(v.provenance.pause_params)},
            {"template_params", params_to_json(v.provenance.template_params)},
            {"corpus_id", v.provenance.corpus_id},
            {"run_seed", v.provenance.run_seed}};
  if (v.provenance.quantiles) {
    prov["quantiles"] = {{"presence", v.provenance.quantiles->presence},
                         {"content", v.provenance.quantiles->content},
                         {"grounded", v.provenance.quantiles->grounded}};
  } else {
    prov["quantiles"] = nullptr;
  }
  return json{{"format", kVocabFormat},
              {"pause_phrases", std::move(pause)},
              {"lookback_templates", std::move(templates)},
              {"seed_markers", v.seed_markers},
              {"fallback_template", v.fallback_template},
              {"provenance", std::move(prov)}};
}

PhraseVocabulary vocabulary_from_json(const json& j) {
  PhraseVocabulary v;
  try {
    const auto format = j.value("format", std::string{});
    require(format == kVocabFormat, ErrorKind::Config,
            "unsupported vocabulary format '" + format + "' (expected " + std::string(kVocabFormat) + ")");
    v.pause_phrases.clear();
    for (const auto& e : j.at("pause_phrases")) v.pause_phrases.push_back(entry_from_json(e));
    for (const auto& e : j.at("lookback_templates")) {
      auto entry = entry_from_json(e);
      if (entry.injection.empty()) entry.injection = text::render_template(entry.text);
      v.lookback_templates.push_back(std::move(entry));
    }
    v.seed_markers = j.value("seed_markers", std::vector<std::string>{});
    v.fallback_template = j.value("fallback_template", std::string{});
    if (j.contains("provenance")) {
      const auto& p = j["provenance"];
      if (p.contains("thresholds")) {
        const auto& t = p["thresholds"];
        v.provenance.thresholds = {t.value("presence_abs", 0.0), t.value("content_abs", 0.0), t.value("grounded", 0.0)};
      }
      if (p.contains("quantiles") && p["quantiles"].is_object()) {
        const auto& q = p["quantiles"];
        v.provenance.quantiles = probe::QuantileLevels{q.value("presence", 0.9), q.value("content", 0.5),
                                                       q.value("grounded", 0.1)};
      }
      if (p.contains("pause_params")) v.provenance.pause_params = params_from_json(p["pause_params"], default_pause_params());
      if (p.contains("template_params"))
        v.provenance.template_params = params_from_json(p["template_params"], default_template_params());
      v.provenance.corpus_id = p.value("corpus_id", std::string{});
      v.provenance.run_seed = p.value("run_seed", std::uint64_t{0});
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed vocabulary: ") + e.what());
  }
  return v;
}

std::string dump(const PhraseVocabulary& v) { return to_json(v).dump(2) + "\n"; }

std::vector<std::vector<StepFlag>> align_flags(std::span<const ThinkingTrace> traces,
                                               std::span<const probe::ProbeRecord> records,
                                               std::span<const StepFlag> flags) {
  require(records.size() == flags.size(), ErrorKind::Alignment, "flags do not align with probe records");
  std::map<std::pair<std::string, int>, std::size_t> index;
  std::vector<std::vector<StepFlag>> out(traces.size());
  for (std::size_t t = 0; t < traces.size(); ++t) {
    index[{traces[t].question_id, traces[t].pass_index}] = t;
    out[t].assign(traces[t].tokens.size(), StepFlag::Neutral);
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto it = index.find({records[i].question_id, records[i].pass_index});
    if (it == index.end()) continue;
    auto& f = out[it->second];
    const std::size_t step = records[i].step;
    if (step >= 1 && step <= f.size()) f[step - 1] = flags[i];
  }
  return out;
}

namespace {

struct Counts {
  std::size_t occurrences = 0;
  std::size_t hits = 0;
};

struct CountTable {
  std::unordered_map<std::string, Counts> grams;
  std::size_t positions = 0;
  std::size_t flagged_positions = 0;

  void merge(CountTable&& other) {
    positions += other.positions;
    flagged_positions += other.flagged_positions;
    for (auto& [g, c] : other.grams) {
      auto& mine = grams[g];
      mine.occurrences += c.occurrences;
      mine.hits += c.hits;
    }
  }
};

void count_trace(const ThinkingTrace& trace, const std::vector<StepFlag>& flags, StepFlag target,
                 const MiningParams& params, CountTable& table) {
  require(flags.size() == trace.tokens.size(), ErrorKind::Alignment,
          "flags for trace '" + trace.question_id + "' do not cover every token");
  const auto texts = trace.token_texts();
  const auto words = text::words_with_token_ends(texts);
  for (std::size_t i = 0; i < words.size(); ++i) {
    const bool flagged = flags[words[i].end_token] == target;
    ++table.positions;
    table.flagged_positions += flagged ? 1 : 0;
    std::string gram;
    for (int n = 1; n <= params.n_max && static_cast<std::size_t>(n) <= i + 1; ++n) {
      const auto& w = words[i + 1 - static_cast<std::size_t>(n)].text;
      gram = n == 1 ? w : w + ' ' + gram;
      if (n < params.n_min) continue;
      auto& c = table.grams[gram];
      ++c.occurrences;
      c.hits += flagged ? 1 : 0;
    }
  }
}

std::vector<std::string> strict_subgrams(const std::vector<std::string>& words) {
  std::vector<std::string> out;
  const std::size_t n = words.size();
  for (std::size_t len = 1; len < n; ++len) {
    for (std::size_t start = 0; start + len <= n; ++start) {
      std::string g = words[start];
      for (std::size_t k = start + 1; k < start + len; ++k) g += ' ' + words[k];
      out.push_back(std::move(g));
    }
  }
  return out;
}

}  // namespace

std::vector<PhraseEntry> mine_enriched(std::span<const ThinkingTrace> traces,
                                       std::span<const std::vector<StepFlag>> flags, StepFlag target,
                                       const MiningParams& params, bool correct_only, std::size_t jobs) {
  require(traces.size() == flags.size(), ErrorKind::Alignment, "one flag vector per trace is required");
  require(params.n_min >= 1 && params.n_min <= params.n_max, ErrorKind::Config, "invalid n-gram range");

  const std::size_t n_chunks = std::max<std::size_t>(1, std::min(jobs, traces.size()));
  std::vector<CountTable> partial(n_chunks);
  parallel_for(n_chunks, n_chunks, [&](std::size_t chunk) {
    for (std::size_t t = chunk; t < traces.size(); t += n_chunks) {
      if (correct_only && traces[t].correct != true) continue;
      count_trace(traces[t], flags[t], target, params, partial[chunk]);
    }
  });
  CountTable table;
  for (auto& p : partial) table.merge(std::move(p));

  if (table.flagged_positions == 0 || table.positions == 0) return {};
  const double background =
      static_cast<double>(table.flagged_positions) / static_cast<double>(table.positions);

  std::map<std::string, PhraseEntry> kept;
  for (const auto& [gram, c] : table.grams) {
    if (c.hits < params.min_support || c.hits == 0) continue;
    const double rate = static_cast<double>(c.hits) / static_cast<double>(c.occurrences);
    const double enrichment = rate / background;
    if (enrichment < params.min_enrichment) continue;
    PhraseEntry e;
    e.text = gram;
    e.n = static_cast<int>(std::count(gram.begin(), gram.end(), ' ')) + 1;
    e.enrichment = enrichment;
    e.support = c.hits;
    e.occurrences = c.occurrences;
    kept.emplace(gram, std::move(e));
  }

  std::vector<PhraseEntry> out;
  for (const auto& [gram, e] : kept) {
    bool dominated = false;
    if (e.n > 1) {
      for (const auto& sub : strict_subgrams(text::split_words(gram))) {
        auto it = kept.find(sub);
        if (it != kept.end() && it->second.enrichment >= e.enrichment) {
          dominated = true;
          break;
        }
      }
    }
    if (!dominated) out.push_back(e);
  }
  std::sort(out.begin(), out.end(), [](const PhraseEntry& a, const PhraseEntry& b) {
    if (a.enrichment != b.enrichment) return a.enrichment > b.enrichment;
    return a.text < b.text;
  });
  return out;
}

std::vector<PhraseEntry> mine_pause_phrases(std::span<const ThinkingTrace> traces,
                                            std::span<const std::vector<StepFlag>> flags,
                                            const MiningParams& params, std::size_t jobs) {
  return mine_enriched(traces, flags, StepFlag::PresenceSensitive, params, false, jobs);
}

std::vector<PhraseEntry> mine_lookback_templates(std::span<const ThinkingTrace> traces,
                                                 std::span<const std::vector<StepFlag>> flags,
                                                 const MiningParams& params, std::size_t jobs) {
  const bool any_correct = std::any_of(traces.begin(), traces.end(), [](const auto& t) { return t.correct == true; });
  require(any_correct, ErrorKind::InsufficientData,
          "no trace is labeled correct; lookback templates are mined from correctly solved examples, so supply a "
          "labeled validation set");
  auto entries = mine_enriched(traces, flags, StepFlag::ContentGrounded, params, true, jobs);
  for (auto& e : entries) e.injection = text::render_template(e.text);
  return entries;
}

AlignmentReport alignment_rate(const PhraseVocabulary& vocab, std::span<const ThinkingTrace> traces,
                               std::span<const std::vector<StepFlag>> flags) {
  require(traces.size() == flags.size(), ErrorKind::Alignment, "one flag vector per trace is required");
  const auto phrases = vocab.trigger_phrases();
  require(!phrases.empty(), ErrorKind::EmptyInput, "alignment rate is undefined for an empty vocabulary");

  std::vector<std::vector<std::string>> phrase_words;
  for (const auto& p : phrases) phrase_words.push_back(text::split_words(p));
  std::vector<PhraseAlignment> per(phrases.size());
  for (std::size_t p = 0; p < phrases.size(); ++p) per[p].phrase = phrases[p];

  for (std::size_t t = 0; t < traces.size(); ++t) {
    require(flags[t].size() == traces[t].tokens.size(), ErrorKind::Alignment,
            "flags for trace '" + traces[t].question_id + "' do not cover every token");
    const auto texts = traces[t].token_texts();
    const auto words = text::words_with_token_ends(texts);
    for (std::size_t i = 0; i < words.size(); ++i) {
      for (std::size_t p = 0; p < phrases.size(); ++p) {
        const auto& pw = phrase_words[p];
        if (pw.empty() || pw.size() > i + 1) continue;
        bool match = true;
        for (std::size_t k = 0; k < pw.size() && match; ++k) match = words[i + 1 - pw.size() + k].text == pw[k];
        if (!match) continue;
        ++per[p].occurrences;
        per[p].aligned += flags[t][words[i].end_token] == StepFlag::PresenceSensitive ? 1 : 0;
      }
    }
  }

  AlignmentReport report;
  for (auto& pa : per) {
    if (pa.occurrences == 0) {
      report.warnings.push_back("phrase '" + pa.phrase + "' never occurs; excluded from the alignment rate");
      continue;
    }
    report.occurrences += pa.occurrences;
    report.aligned += pa.aligned;
    report.per_phrase.push_back(pa);
  }
  require(report.occurrences > 0, ErrorKind::EmptyInput, "no vocabulary phrase occurs in the corpus");
  report.rate = static_cast<double>(report.aligned) / static_cast<double>(report.occurrences);
  return report;
}

json to_json(const AlignmentReport& r) {
  json per = json::array();
  for (const auto& p : r.per_phrase) {
    per.push_back({{"phrase", p.phrase}, {"occurrences", p.occurrences}, {"aligned", p.aligned}});
  }
  return json{{"rate", r.rate}, {"occurrences", r.occurrences}, {"aligned", r.aligned}, {"per_phrase", per},
              {"warnings", r.warnings}};
}

}  // namespace lookback::miner
