#include "lookback/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <mutex>
#include <set>

#include "lookback/controller.hpp"
#include "lookback/error.hpp"
#include "lookback/eval.hpp"
#include "lookback/http_backend.hpp"
#include "lookback/image.hpp"
#include "lookback/jsonl.hpp"
#include "lookback/mock_backend.hpp"
#include "lookback/parallel.hpp"
#include "lookback/probe.hpp"
#include "lookback/text.hpp"

namespace lookback::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void say(const RunOptions& opts, const std::string& msg) {
  if (opts.log) *opts.log << msg << "\n";
}

void warn(const RunOptions& opts, std::vector<std::string>& sink, const std::string& msg) {
  sink.push_back(msg);
  say(opts, "warning: " + msg);
}

void ensure_parent(const std::string& path) {
  auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

/// Opens a checksummed manifest for appending, dropping a torn final line.
std::vector<json> open_manifest(const std::string& path, const RunOptions& opts, std::vector<std::string>& warnings) {
  if (!fs::exists(path)) return {};
  auto scan = jsonl::read_manifest(path);
  if (scan.torn_tail) {
    warn(opts, warnings, "manifest '" + path + "' ended in a partial line (interrupted write); it was discarded");
    if (!opts.dry_run) fs::resize_file(path, scan.valid_bytes);
  }
  return std::move(scan.payloads);
}

std::vector<ThinkingTrace> load_traces(const std::string& path) {
  require(fs::exists(path), ErrorKind::Config, "traces file '" + path + "' does not exist");
  std::vector<ThinkingTrace> out;
  for (const auto& j : jsonl::read(path)) out.push_back(trace_from_json(j));
  return out;
}

json stamped(json j, const std::string& hash) {
  j["config_hash"] = hash;
  return j;
}

std::string jsonl_text(const std::vector<json>& lines) {
  std::string out;
  for (const auto& j : lines) out += j.dump() + "\n";
  return out;
}

std::string hash_file(const std::string& path) {
  if (path.empty() || !fs::exists(path)) return "none";
  return text::hex64(text::fnv1a64(jsonl::read_file(path)));
}

ContextKind kContexts[] = {ContextKind::Real, ContextKind::Noise, ContextKind::Absent};

}  // namespace

// ---------------------------------------------------------------------------

std::unique_ptr<Backend> make_backend(const config::RunConfig& cfg) {
  const std::string& url = cfg.backend.base_url;
  if (url.rfind("mock://", 0) == 0) {
    const std::string rest = url.substr(7);
    if (rest.empty()) return std::make_unique<MockBackend>(MockScript{});
    const std::string path = cfg.resolve(rest);
    require(fs::exists(path), ErrorKind::Config, "mock script '" + path + "' does not exist");
    try {
      return std::make_unique<MockBackend>(MockScript::from_json(json::parse(jsonl::read_file(path))));
    } catch (const json::exception& e) {
      fail(ErrorKind::Config, "mock script '" + path + "': " + e.what());
    }
  }
  require(url.rfind("http://", 0) == 0 || url.rfind("https://", 0) == 0, ErrorKind::Config,
          "backend.base_url must start with http://, https:// or mock://");
  HttpBackendOptions o;
  o.base_url = url;
  if (const char* tok = std::getenv(cfg.backend.auth_env_var.c_str())) o.auth_token = tok;
  o.retry.max_retries = cfg.backend.max_retries;
  o.retry.base_delay = std::chrono::milliseconds(cfg.backend.retry_base_ms);
  return std::make_unique<HttpBackend>(o);
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Transport:
    case ErrorKind::Protocol:
    case ErrorKind::DataIntegrity:
    case ErrorKind::Stream: return 3;
    case ErrorKind::Coverage:
    case ErrorKind::InsufficientData:
    case ErrorKind::EmptyInput:
    case ErrorKind::Alignment: return 4;
    default: return 1;
  }
}

std::vector<Question> load_questions(const std::string& path) {
  require(!path.empty(), ErrorKind::Config, "paths.questions is not set");
  require(fs::exists(path), ErrorKind::Config, "questions file '" + path + "' does not exist");
  const auto base = fs::path(path).parent_path();
  std::vector<Question> out;
  std::set<std::string> ids;
  for (const auto& j : jsonl::read(path)) {
    Question q = question_from_json(j);
    require(ids.insert(q.id).second, ErrorKind::Config, "duplicate question id '" + q.id + "'");
    if (!q.image.empty() && fs::path(q.image).is_relative()) q.image = (base / q.image).lexically_normal().string();
    out.push_back(std::move(q));
  }
  return out;
}

std::int64_t pass_seed(std::int64_t run_seed, const std::string& question_id, int pass_index) {
  std::uint64_t h = text::fnv1a64(question_id, text::fnv1a64(std::to_string(run_seed)));
  h = text::fnv1a64(std::to_string(pass_index), h);
  return static_cast<std::int64_t>(h >> 1);
}

std::string hash_comment(const std::string& config_hash) { return "# config_hash=" + config_hash + "\n"; }

// ---------------------------------------------------------------------------
// probe

namespace {

std::string trace_key(const ThinkingTrace& t, const config::RunConfig& cfg) {
  std::string s = t.question_id + '\x1f' + std::to_string(t.pass_index) + '\x1f' + cfg.backend.model_id + '\x1f' +
                  std::to_string(cfg.sampling.seed) + '\x1f' + std::to_string(cfg.probe.noise_mean) + '\x1f' +
                  std::to_string(cfg.probe.noise_std);
  for (const auto& tok : t.tokens) s += '\x1f' + tok.text;
  return text::hex64(text::fnv1a64(s));
}

}  // namespace

ProbeSummary cmd_probe(const config::RunConfig& cfg, Backend& backend, const RunOptions& opts) {
  ProbeSummary sum;
  const std::string hash = cfg.hash();
  auto traces = load_traces(cfg.resolve(cfg.paths.traces));
  const auto questions = load_questions(cfg.resolve(cfg.paths.questions));
  std::map<std::string, const Question*> by_id;
  for (const auto& q : questions) by_id[q.id] = &q;
  sum.traces = traces.size();

  const std::string manifest_path = cfg.resolve(cfg.paths.work) + "/probe_manifest.jsonl";
  std::map<std::pair<std::string, std::string>, std::vector<double>> cached;  // (trace key, context) -> logprobs
  std::set<std::string> skipped_logged;
  for (const auto& p : open_manifest(manifest_path, opts, sum.warnings)) {
    if (p.value("kind", "") == "score") {
      cached[{p.at("trace").get<std::string>(), p.at("context").get<std::string>()}] =
          p.at("logprobs").get<std::vector<double>>();
    } else if (p.value("kind", "") == "skip") {
      skipped_logged.insert(p.at("trace").get<std::string>());
    }
  }

  struct Unit {
    std::size_t trace;
    ContextKind kind;
  };
  std::vector<Unit> pending;
  std::vector<std::string> keys(traces.size());
  std::vector<VisualContext> reals(traces.size());
  std::vector<bool> usable(traces.size(), false);
  std::vector<json> new_skips;
  std::map<std::string, VisualContext> image_cache;

  for (std::size_t i = 0; i < traces.size(); ++i) {
    auto& t = traces[i];
    validate(t);
    if (cfg.probe.max_tokens > 0 && t.tokens.size() > static_cast<std::size_t>(cfg.probe.max_tokens)) {
      warn(opts, sum.warnings, "trace " + t.question_id + "#" + std::to_string(t.pass_index) + " probed on its first " +
                                   std::to_string(cfg.probe.max_tokens) + " of " + std::to_string(t.tokens.size()) +
                                   " tokens (probe.max_tokens)");
      t.tokens.resize(static_cast<std::size_t>(cfg.probe.max_tokens));
      ++sum.truncated;
    }
    keys[i] = trace_key(t, cfg);
    std::string reason;
    auto q = by_id.find(t.question_id);
    if (q == by_id.end()) {
      reason = "question not found";
    } else if (q->second->image.empty() || !fs::exists(q->second->image)) {
      reason = "missing image '" + q->second->image + "'";
    } else {
      auto [it, fresh] = image_cache.try_emplace(q->second->image);
      if (fresh) it->second = image::load_real(q->second->image);
      reals[i] = it->second;
    }
    if (!reason.empty()) {
      ++sum.skipped;
      warn(opts, sum.warnings, "skipping trace " + t.question_id + "#" + std::to_string(t.pass_index) + ": " + reason);
      if (!skipped_logged.count(keys[i])) {
        new_skips.push_back({{"kind", "skip"}, {"trace", keys[i]}, {"question_id", t.question_id},
                             {"pass_index", t.pass_index}, {"reason", reason}});
        skipped_logged.insert(keys[i]);
      }
      continue;
    }
    usable[i] = true;
    for (auto kind : kContexts) {
      if (cached.count({keys[i], std::string(to_string(kind))})) ++sum.reused;
      else pending.push_back({i, kind});
    }
  }
  sum.planned.score = pending.size();
  say(opts, "probe: " + std::to_string(traces.size()) + " traces, " + std::to_string(pending.size()) +
                " score calls planned, " + std::to_string(sum.reused) + " reused from manifest");
  if (opts.dry_run) return sum;

  fs::create_directories(fs::path(manifest_path).parent_path());
  jsonl::Writer manifest(manifest_path);
  for (const auto& s : new_skips) manifest.write(jsonl::seal(s));

  std::mutex mu;
  std::size_t done = 0;
  try {
    parallel_for(pending.size(), static_cast<std::size_t>(cfg.backend.in_flight), [&](std::size_t u) {
      const auto& unit = pending[u];
      const auto& t = traces[unit.trace];
      ScoreRequest req;
      req.model_id = cfg.backend.model_id;
      req.question = by_id.at(t.question_id)->text;
      req.continuation = t.token_texts();
      if (unit.kind == ContextKind::Real) {
        req.context = reals[unit.trace];
      } else if (unit.kind == ContextKind::Noise) {
        req.context = image::make_noise_context(reals[unit.trace], static_cast<std::uint64_t>(cfg.sampling.seed),
                                                {cfg.probe.noise_mean, cfg.probe.noise_std});
      }
      auto resp = backend.score(req);
      std::vector<double> lps;
      lps.reserve(resp.tokens.size());
      for (const auto& tl : resp.tokens) lps.push_back(tl.logprob);
      json payload{{"kind", "score"}, {"trace", keys[unit.trace]}, {"context", to_string(unit.kind)},
                   {"logprobs", lps}};
      manifest.write(jsonl::seal(payload));
      std::lock_guard lock(mu);
      cached[{keys[unit.trace], std::string(to_string(unit.kind))}] = std::move(lps);
      ++done;
    });
  } catch (const Error& e) {
    fail(e.kind(), std::string(e.what()) + "; " + std::to_string(done) + " of " + std::to_string(pending.size()) +
                       " score calls were saved, rerun the same command to resume");
  }

  std::vector<probe::ProbeRecord> records;
  std::vector<json> lines;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (!usable[i]) continue;
    ScoreResponse r[3];
    for (int c = 0; c < 3; ++c) {
      const auto& lps = cached.at({keys[i], std::string(to_string(kContexts[c]))});
      for (std::size_t k = 0; k < lps.size(); ++k) {
        r[c].tokens.push_back({k < traces[i].tokens.size() ? traces[i].tokens[k].text : std::string(), lps[k]});
      }
    }
    for (auto& rec : probe::step_perplexities(traces[i], r[0], r[1], r[2])) {
      lines.push_back(stamped(probe::to_json(rec), hash));
      records.push_back(std::move(rec));
    }
  }
  sum.records = records.size();
  const std::string out_path = cfg.resolve(cfg.paths.probe_records);
  ensure_parent(out_path);
  jsonl::write_file_atomic(out_path, jsonl_text(lines));
  if (!records.empty()) {
    const std::string curves_path = cfg.resolve(cfg.paths.curves);
    ensure_parent(curves_path);
    auto curves = probe::aggregate_delta_curves(records, {}, cfg.probe.bins);
    jsonl::write_file_atomic(curves_path, hash_comment(hash) + probe::curves_to_csv(curves));
  } else {
    warn(opts, sum.warnings, "no probe records were produced; curves not written");
  }
  say(opts, "probe: wrote " + std::to_string(records.size()) + " records to " + out_path);
  return sum;
}

// ---------------------------------------------------------------------------
// mine

MineSummary cmd_mine(const config::RunConfig& cfg, const RunOptions& opts) {
  MineSummary sum;
  const std::string hash = cfg.hash();
  const std::string records_path = cfg.resolve(cfg.paths.probe_records);
  require(fs::exists(records_path), ErrorKind::Config, "probe records '" + records_path + "' do not exist; run probe first");
  std::vector<probe::ProbeRecord> records;
  for (const auto& j : jsonl::read(records_path)) records.push_back(probe::record_from_json(j));
  const std::string traces_path = cfg.resolve(cfg.paths.traces);
  auto traces = load_traces(traces_path);

  probe::Thresholds thresholds;
  std::optional<probe::QuantileLevels> levels;
  if (cfg.probe.manual) {
    thresholds = *cfg.probe.manual;
  } else {
    levels = cfg.probe.quantiles;
    try {
      thresholds = probe::quantile_thresholds(records, *levels);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InsufficientData) throw;
      fail(ErrorKind::InsufficientData,
           std::string(e.what()) + "; probe more traces or set explicit thresholds with [probe] presence_abs, "
                                   "content_abs and grounded");
    }
  }
  const auto flags = probe::flag_steps(records, thresholds);
  const auto aligned = miner::align_flags(traces, records, flags);
  const std::size_t flagged =
      static_cast<std::size_t>(std::count_if(flags.begin(), flags.end(), [](auto f) { return f != probe::StepFlag::Neutral; }));
  if (flagged == 0) warn(opts, sum.warnings, "no step was flagged; the vocabulary holds only the seed markers");

  const std::size_t jobs = static_cast<std::size_t>(cfg.backend.in_flight);
  auto& v = sum.vocab;
  v.pause_phrases = miner::mine_pause_phrases(traces, aligned, cfg.miner.pause, jobs);
  try {
    v.lookback_templates = miner::mine_lookback_templates(traces, aligned, cfg.miner.templates, jobs);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InsufficientData) throw;
    warn(opts, sum.warnings, std::string("no lookback templates mined: ") + e.what());
  }
  v.fallback_template = cfg.miner.use_fallback_template ? cfg.miner.fallback_template : std::string();
  v.provenance.thresholds = thresholds;
  v.provenance.quantiles = levels;
  v.provenance.pause_params = cfg.miner.pause;
  v.provenance.template_params = cfg.miner.templates;
  v.provenance.corpus_id = hash_file(traces_path);
  v.provenance.run_seed = static_cast<std::uint64_t>(cfg.sampling.seed);

  try {
    sum.alignment = miner::alignment_rate(v, traces, aligned);
    for (const auto& w : sum.alignment.warnings) warn(opts, sum.warnings, w);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::EmptyInput) throw;
    warn(opts, sum.warnings, std::string("alignment rate undefined: ") + e.what());
  }
  say(opts, "mine: " + std::to_string(v.pause_phrases.size()) + " pause phrases, " +
                std::to_string(v.lookback_templates.size()) + " templates, alignment " +
                std::to_string(sum.alignment.rate));
  if (opts.dry_run) return sum;

  const std::string vocab_path = cfg.resolve(cfg.paths.vocab);
  ensure_parent(vocab_path);
  json j = miner::to_json(v);
  j["config_hash"] = hash;
  jsonl::write_file_atomic(vocab_path, j.dump(2) + "\n");
  json a = miner::to_json(sum.alignment);
  a["config_hash"] = hash;
  jsonl::write_file_atomic(fs::path(vocab_path).replace_extension(".alignment.json").string(), a.dump(2) + "\n");
  return sum;
}

// ---------------------------------------------------------------------------
// decode

namespace {

miner::PhraseVocabulary load_vocab(const config::RunConfig& cfg, std::string& vocab_bytes) {
  if (!cfg.controller_enabled) {
    miner::PhraseVocabulary none;
    none.seed_markers.clear();
    vocab_bytes = "controller-disabled";
    return none;
  }
  const std::string path = cfg.resolve(cfg.paths.vocab);
  require(fs::exists(path), ErrorKind::Config, "vocabulary '" + path + "' does not exist; run mine first");
  vocab_bytes = jsonl::read_file(path);
  try {
    return miner::vocabulary_from_json(json::parse(vocab_bytes));
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, "vocabulary '" + path + "': " + e.what());
  }
}

}  // namespace

DecodeSummary cmd_decode(const config::RunConfig& cfg, Backend& backend, const RunOptions& opts) {
  DecodeSummary sum;
  const std::string hash = cfg.hash();
  const auto questions = load_questions(cfg.resolve(cfg.paths.questions));
  std::string vocab_bytes;
  const auto vocab = load_vocab(cfg, vocab_bytes);
  const std::string run_key = text::hex64(text::fnv1a64(vocab_bytes, text::fnv1a64(hash)));

  const std::string manifest_path = cfg.resolve(cfg.paths.work) + "/decode_manifest.jsonl";
  std::map<std::pair<std::string, int>, json> done;
  std::size_t stale = 0;
  for (auto& p : open_manifest(manifest_path, opts, sum.warnings)) {
    if (p.value("kind", "") != "trace") continue;
    if (p.value("run", "") != run_key) {
      ++stale;
      continue;
    }
    auto key = std::make_pair(p["trace"].at("question_id").get<std::string>(), p["trace"].at("pass_index").get<int>());
    done[key] = std::move(p["trace"]);
  }
  if (stale) warn(opts, sum.warnings, std::to_string(stale) + " manifest traces from a different config were ignored");

  struct Unit {
    const Question* q;
    int pass;
  };
  std::vector<Unit> pending;
  for (const auto& q : questions) {
    for (int p = 0; p < cfg.sampling.n_passes; ++p) {
      ++sum.units;
      if (done.count({q.id, p})) ++sum.resumed;
      else pending.push_back({&q, p});
    }
  }
  sum.planned.generate = pending.size();
  sum.planned.lower_bound = !vocab.trigger_phrases().empty();
  say(opts, "decode: " + std::to_string(sum.units) + " units, " + std::to_string(sum.resumed) + " resumed, " +
                (sum.planned.lower_bound ? ">= " : "") + std::to_string(pending.size()) + " generate calls planned");
  if (opts.dry_run) return sum;

  controller::ControllerConfig ccfg = cfg.controller;
  fs::create_directories(fs::path(manifest_path).parent_path());
  jsonl::Writer manifest(manifest_path);
  std::mutex mu;
  std::vector<std::string> failures;
  std::map<std::string, VisualContext> image_cache;

  parallel_for(pending.size(), static_cast<std::size_t>(cfg.backend.in_flight), [&](std::size_t u) {
    const auto& unit = pending[u];
    const Question& q = *unit.q;
    const std::string id = q.id + "#" + std::to_string(unit.pass);
    controller::DecodeRequest req;
    req.question_id = q.id;
    req.question = q.text;
    req.model_id = cfg.backend.model_id;
    req.pass_index = unit.pass;
    req.sampling.temperature = cfg.sampling.temperature;
    req.sampling.top_p = cfg.sampling.top_p;
    req.sampling.seed = pass_seed(cfg.sampling.seed, q.id, unit.pass);
    req.sampling.max_new_tokens = cfg.budget();
    req.branching.enabled = cfg.branching.enabled;
    req.branching.branches = cfg.branching.m;
    req.branching.horizon = cfg.branching.h;
    req.branching.noise_seed = static_cast<std::uint64_t>(cfg.sampling.seed);
    req.branching.jobs = static_cast<std::size_t>(cfg.backend.in_flight);

    std::optional<std::string> error;
    if (!q.image.empty()) {
      std::unique_lock lock(mu);
      auto it = image_cache.find(q.image);
      if (it == image_cache.end()) {
        lock.unlock();
        VisualContext ctx;
        try {
          ctx = image::load_real(q.image);
        } catch (const Error& e) {
          error = e.what();
        }
        lock.lock();
        if (!error) it = image_cache.emplace(q.image, std::move(ctx)).first;
      }
      if (!error) req.context = it->second;
    }

    controller::DecodeResult res;
    if (!error) {
      res = controller::run_decode(req, vocab, ccfg, backend);
      error = res.error;
      if (!error && res.trace.tokens.empty()) error = "backend produced no tokens";
    }
    if (error) {
      std::lock_guard lock(mu);
      failures.push_back(id + ": " + *error);
      manifest.write(jsonl::seal({{"kind", "failure"}, {"run", run_key}, {"question_id", q.id},
                                  {"pass_index", unit.pass}, {"error", *error}}));
      return;
    }
    auto& t = res.trace;
    t.category = q.category;
    t.difficulty = q.difficulty;
    const std::string answer = t.answer_text().empty() ? t.full_text() : t.answer_text();
    t.correct = eval::judge(answer, q.answer, cfg.eval.answer_patterns);
    json tj = to_json(t, cfg.branching.enabled);
    manifest.write(jsonl::seal({{"kind", "trace"}, {"run", run_key}, {"trace", tj}}));
    std::lock_guard lock(mu);
    done[{q.id, unit.pass}] = std::move(tj);
    ++sum.decoded;
  });

  std::vector<json> lines;
  for (const auto& q : questions) {
    for (int p = 0; p < cfg.sampling.n_passes; ++p) {
      if (auto it = done.find({q.id, p}); it != done.end()) lines.push_back(stamped(it->second, hash));
    }
  }
  const std::string out_path = cfg.resolve(cfg.paths.traces);
  ensure_parent(out_path);
  jsonl::write_file_atomic(out_path, jsonl_text(lines));
  say(opts, "decode: wrote " + std::to_string(lines.size()) + " traces to " + out_path);

  sum.failed = failures.size();
  if (!failures.empty()) {
    std::sort(failures.begin(), failures.end());
    for (const auto& f : failures) warn(opts, sum.warnings, "decode failed for " + f);
    fail(ErrorKind::Stream, std::to_string(failures.size()) + " of " + std::to_string(sum.units) +
                                " decode units failed (first: " + failures.front() +
                                "); rerun the same command to retry them");
  }
  return sum;
}

// ---------------------------------------------------------------------------
// eval

EvalSummary cmd_eval(const config::RunConfig& cfg, const RunOptions& opts) {
  EvalSummary sum;
  const std::string hash = cfg.hash();
  const auto traces = load_traces(cfg.resolve(cfg.paths.traces));
  std::map<std::string, Question> by_id;
  if (!cfg.paths.questions.empty()) {
    for (auto& q : load_questions(cfg.resolve(cfg.paths.questions))) by_id[q.id] = std::move(q);
  }
  std::vector<json> lines;
  for (auto t : traces) {
    bool correct = false;
    auto q = by_id.find(t.question_id);
    if (t.correct) {
      correct = *t.correct;
    } else if (q != by_id.end()) {
      const std::string answer = t.answer_text().empty() ? t.full_text() : t.answer_text();
      correct = eval::judge(answer, q->second.answer, cfg.eval.answer_patterns);
    } else {
      warn(opts, sum.warnings, "trace " + t.question_id + "#" + std::to_string(t.pass_index) +
                                   " has no correctness label and no gold answer; counted as wrong");
    }
    if (q != by_id.end()) {
      if (t.category.empty()) t.category = q->second.category;
      if (t.difficulty == Difficulty::Unknown) t.difficulty = q->second.difficulty;
    }
    lines.push_back(stamped(eval::to_json(eval::record_from_trace(t, cfg.eval.method_id, correct)), hash));
  }
  sum.records = lines.size();
  if (opts.dry_run) return sum;
  const std::string out_path = cfg.resolve(cfg.paths.eval_records);
  ensure_parent(out_path);
  jsonl::write_file_atomic(out_path, jsonl_text(lines));
  say(opts, "eval: wrote " + std::to_string(lines.size()) + " records to " + out_path);
  return sum;
}

// ---------------------------------------------------------------------------
// report

namespace {

std::vector<eval::EvalRecord> load_eval_records(const std::string& path, bool force, const RunOptions& opts,
                                                std::vector<std::string>& warnings) {
  require(fs::exists(path), ErrorKind::Config, "eval records '" + path + "' do not exist");
  std::vector<eval::EvalRecord> out;
  std::set<std::string> hashes;
  for (const auto& j : jsonl::read(path)) {
    hashes.insert(j.value("config_hash", std::string("none")));
    out.push_back(eval::record_from_json(j));
  }
  if (hashes.size() > 1) {
    const std::string msg = "'" + path + "' mixes records from " + std::to_string(hashes.size()) + " config hashes";
    require(force, ErrorKind::Config, msg + "; pass --force to report anyway");
    warn(opts, warnings, msg);
  }
  return out;
}

}  // namespace

ReportSummary cmd_report(const config::RunConfig& cfg, const RunOptions& opts) {
  ReportSummary sum;
  const std::string hash = cfg.hash();
  const std::string ours_path = cfg.resolve(cfg.paths.eval_records);
  auto ours = load_eval_records(ours_path, opts.force, opts, sum.warnings);
  require(!ours.empty(), ErrorKind::EmptyInput, "no eval records in '" + ours_path + "'");

  std::vector<eval::EvalRecord> all = ours;
  std::vector<eval::EvalRecord> original;
  json inputs = json::array();
  inputs.push_back({{"path", ours_path}, {"hash", hash_file(ours_path)}, {"role", "method"}});
  if (!cfg.paths.original.empty()) {
    const auto p = cfg.resolve(cfg.paths.original);
    original = load_eval_records(p, opts.force, opts, sum.warnings);
    all.insert(all.end(), original.begin(), original.end());
    inputs.push_back({{"path", p}, {"hash", hash_file(p)}, {"role", "original"}});
  }
  for (const auto& b : cfg.paths.baselines) {
    const auto p = cfg.resolve(b);
    auto recs = load_eval_records(p, opts.force, opts, sum.warnings);
    all.insert(all.end(), recs.begin(), recs.end());
    inputs.push_back({{"path", p}, {"hash", hash_file(p)}, {"role", "baseline"}});
  }

  std::set<std::string> methods;
  for (const auto& r : all) methods.insert(r.method_id);

  std::vector<eval::ComparisonReport> comparisons;
  if (!original.empty()) {
    std::set<std::string> cats;
    for (const auto& r : ours) cats.insert(r.category);
    comparisons.push_back(eval::comparison_report(ours, original, {cats.begin(), cats.end()}, cfg.eval.pass1_mode));
  } else {
    warn(opts, sum.warnings, "paths.original is not set; comparison table skipped");
  }
  const auto pass_k = eval::pass_at_k_curves(all);
  std::optional<eval::ZScores> z;
  if (methods.size() >= 2) z = eval::category_zscores(all);
  else warn(opts, sum.warnings, "z-scores need at least two methods; skipped");
  const auto footprint = eval::token_footprint(all);

  if (opts.dry_run) return sum;
  const std::string dir = cfg.resolve(cfg.paths.reports);
  fs::create_directories(dir);
  auto emit = [&](const std::string& name, const std::string& content) {
    const std::string path = dir + "/" + name;
    jsonl::write_file_atomic(path, content);
    sum.outputs.push_back(path);
  };
  if (!comparisons.empty()) {
    emit("comparison.csv", hash_comment(hash) + eval::report_csv(comparisons));
    emit("comparison.txt", hash_comment(hash) + eval::report_text(comparisons));
    json j = json::array();
    for (const auto& c : comparisons) j.push_back(eval::to_json(c));
    emit("comparison.json", json{{"config_hash", hash}, {"reports", j}}.dump(2) + "\n");
  }
  emit("pass_at_k.csv", hash_comment(hash) + eval::pass_at_k_csv(pass_k));
  if (z) emit("zscores.csv", hash_comment(hash) + eval::zscores_csv(*z));
  emit("footprint.csv", hash_comment(hash) + eval::footprint_csv(footprint));
  for (const auto& o : footprint.omitted) sum.warnings.push_back("empty footprint group omitted: " + o);

  json manifest{{"config_hash", hash},
                {"vocab_hash", cfg.controller_enabled ? hash_file(cfg.resolve(cfg.paths.vocab)) : "none"},
                {"config", cfg.to_json()},
                {"inputs", inputs},
                {"outputs", sum.outputs},
                {"omitted_footprint_groups", footprint.omitted},
                {"warnings", sum.warnings}};
  emit("manifest.json", manifest.dump(2) + "\n");
  say(opts, "report: wrote " + std::to_string(sum.outputs.size()) + " files to " + dir);
  return sum;
}

}  // namespace lookback::pipeline
