#include "lookback/controller.hpp"

#include <algorithm>

#include "lookback/branching.hpp"
#include "lookback/image.hpp"
#include "lookback/text.hpp"

namespace lookback::controller {

std::string_view to_string(TemplatePolicy p) {
  switch (p) {
    case TemplatePolicy::RoundRobin: return "round_robin";
    case TemplatePolicy::TopEnrichment: return "top_enrichment";
    case TemplatePolicy::SeededRandom: return "seeded_random";
  }
  return "round_robin";
}

TemplatePolicy template_policy_from_string(std::string_view s) {
  if (s == "round_robin") return TemplatePolicy::RoundRobin;
  if (s == "top_enrichment") return TemplatePolicy::TopEnrichment;
  if (s == "seeded_random") return TemplatePolicy::SeededRandom;
  fail(ErrorKind::Config, "unknown template policy '" + std::string(s) + "'");
}

void ControllerConfig::validate() const {
  require(suffix_len > 0, ErrorKind::Config, "controller.suffix_len must be positive");
  require(cooldown_window > 0, ErrorKind::Config, "controller.cooldown_window must be positive");
  require(cooldown_window >= suffix_len, ErrorKind::Config, "controller.cooldown_window must be >= suffix_len");
}

// ---------------------------------------------------------------------------

SuffixMatcher::SuffixMatcher(const std::vector<std::string>& phrases) {
  nodes_.emplace_back();
  for (const auto& phrase : phrases) {
    auto words = text::split_words(phrase);
    if (words.empty()) continue;
    std::size_t node = 0;
    for (auto it = words.rbegin(); it != words.rend(); ++it) {
      std::size_t next = child(node, *it);
      if (next == 0) {
        next = nodes_.size();
        nodes_[node].children.emplace_back(*it, next);
        nodes_.emplace_back();
      }
      node = next;
    }
    if (!nodes_[node].phrase) {
      nodes_[node].phrase = text::normalize_phrase(phrase);
      ++phrase_count_;
    }
    max_words_ = std::max(max_words_, words.size());
  }
}

std::size_t SuffixMatcher::child(std::size_t node, const std::string& word) const {
  for (const auto& [w, idx] : nodes_[node].children) {
    if (w == word) return idx;
  }
  return 0;
}

std::optional<std::string> SuffixMatcher::longest_suffix(const std::vector<std::string>& words) const {
  std::optional<std::string> best;
  std::size_t node = 0;
  for (auto it = words.rbegin(); it != words.rend(); ++it) {
    node = child(node, *it);
    if (node == 0) break;
    if (nodes_[node].phrase) best = nodes_[node].phrase;
  }
  return best;
}

std::vector<Template> templates_from(const miner::PhraseVocabulary& vocab) {
  std::vector<Template> out;
  for (const auto& t : vocab.lookback_templates) {
    out.push_back({t.injection.empty() ? text::render_template(t.text) : t.injection, t.enrichment});
  }
  if (out.empty() && !vocab.fallback_template.empty()) out.push_back({vocab.fallback_template, 0.0});
  return out;
}

// ---------------------------------------------------------------------------

DecodeSession::DecodeSession(const ControllerConfig& config, std::size_t budget, std::uint64_t pass_seed)
    : config_(config), budget_(budget), rng_(config.template_seed ^ (pass_seed * 0x9e3779b97f4a7c15ULL)) {
  config_.validate();
}

std::vector<std::string> DecodeSession::emitted_texts() const {
  std::vector<std::string> out;
  out.reserve(emitted_.size());
  for (const auto& t : emitted_) out.push_back(t.text);
  return out;
}

void DecodeSession::push_word(std::string raw) {
  auto w = text::normalize_word(raw);
  if (w.empty()) return;
  words_.push_back(std::move(w));
  while (words_.size() > config_.suffix_len) words_.pop_front();
}

void DecodeSession::feed_text(const std::string& s) {
  for (char c : s) {
    if (text::is_space(c)) {
      if (!partial_.empty()) push_word(std::exchange(partial_, {}));
    } else {
      partial_.push_back(c);
    }
  }
}

std::vector<std::string> DecodeSession::rolling_suffix() const {
  std::vector<std::string> out(words_.begin(), words_.end());
  if (!partial_.empty()) {
    auto w = text::normalize_word(partial_);
    if (!w.empty()) out.push_back(std::move(w));
  }
  if (out.size() > config_.suffix_len) out.erase(out.begin(), out.end() - static_cast<long>(config_.suffix_len));
  return out;
}

void DecodeSession::detect_phase() {
  if (in_answer_phase_) return;
  std::size_t longest = config_.think_close_marker.size();
  for (const auto& m : config_.answer_markers) longest = std::max(longest, m.size());
  auto found = [&](const std::string& marker) {
    return !marker.empty() && text_.find(marker, marker_scan_from_) != std::string::npos;
  };
  bool hit = found(config_.think_close_marker);
  for (const auto& m : config_.answer_markers) hit = hit || found(m);
  if (hit) in_answer_phase_ = true;
  // markers may straddle token boundaries; rescan the tail next time
  marker_scan_from_ = text_.size() > longest ? text_.size() - longest + 1 : 0;
}

void DecodeSession::observe(const std::string& tok, double logprob) {
  text_ += tok;
  detect_phase();
  emitted_.push_back({tok, logprob, in_answer_phase_ ? Phase::Answer : Phase::Thinking, false});
  ++budget_used_;
  feed_text(tok);
  if (!in_answer_phase_ && tokens_since_trigger_) ++*tokens_since_trigger_;
}

void DecodeSession::append_injection(const std::string& template_text, const std::string& trigger) {
  std::string forced = template_text;
  if (!text_.empty() && !text::is_space(text_.back()) && !forced.empty() && !text::is_space(forced.front())) {
    forced.insert(forced.begin(), ' ');
  }
  injections_.push_back({emitted_.size(), template_text, trigger});
  emitted_.push_back({forced, 0.0, Phase::Thinking, true});
  text_ += forced;
  feed_text(forced);
  tokens_since_trigger_ = 0;
}

std::size_t DecodeSession::next_template_index(const std::vector<Template>& templates) {
  require(!templates.empty(), ErrorKind::Config, "no lookback templates to inject");
  switch (config_.template_policy) {
    case TemplatePolicy::RoundRobin:
      return rr_cursor_++ % templates.size();
    case TemplatePolicy::TopEnrichment: {
      std::size_t best = 0;
      for (std::size_t i = 1; i < templates.size(); ++i) {
        if (templates[i].enrichment > templates[best].enrichment) best = i;
      }
      return best;
    }
    case TemplatePolicy::SeededRandom:
      return static_cast<std::size_t>(rng_() % templates.size());
  }
  return 0;
}

std::optional<std::string> should_trigger(const DecodeSession& session, const SuffixMatcher& matcher) {
  if (matcher.empty() || session.in_answer_phase()) return std::nullopt;
  if (session.injections().size() >= session.config().max_injections) return std::nullopt;
  if (auto since = session.tokens_since_trigger(); since && *since <= session.config().cooldown_window) {
    return std::nullopt;
  }
  return matcher.longest_suffix(session.rolling_suffix());
}

std::optional<std::string> should_trigger(const DecodeSession& session, const miner::PhraseVocabulary& vocab) {
  return should_trigger(session, SuffixMatcher(vocab.trigger_phrases()));
}

std::string inject(DecodeSession& session, const std::vector<Template>& templates, const std::string& trigger) {
  const auto& chosen = templates.at(session.next_template_index(templates)).text;
  session.append_injection(chosen, trigger);
  return chosen;
}

// ---------------------------------------------------------------------------

DecodeResult run_decode(const DecodeRequest& request, const miner::PhraseVocabulary& vocab,
                        const ControllerConfig& config, Backend& backend) {
  require(request.sampling.max_new_tokens > 0, ErrorKind::Config, "token budget must be positive");
  DecodeSession session(config, static_cast<std::size_t>(request.sampling.max_new_tokens),
                        static_cast<std::uint64_t>(request.sampling.seed));
  const SuffixMatcher matcher(vocab.trigger_phrases());
  const auto templates = templates_from(vocab);
  if (!matcher.empty() && config.max_injections > 0 && templates.empty()) {
    fail(ErrorKind::Config, "vocabulary has pause phrases but no lookback templates to inject");
  }

  const bool branching = request.branching.enabled && request.context.kind == ContextKind::Real;
  VisualContext noise;
  if (branching) noise = image::make_noise_context(request.context, request.branching.noise_seed);

  DecodeResult result;
  ThinkingTrace& trace = result.trace;
  trace.question_id = request.question_id;
  trace.pass_index = request.pass_index;
  trace.model_id = request.model_id;

  while (true) {
    if (session.budget_left() == 0) {
      session.mark_truncated();
      break;
    }
    GenerateRequest g;
    g.model_id = request.model_id;
    g.question = request.question;
    g.context = request.context;
    g.prefix = session.emitted_texts();
    g.sampling = request.sampling;
    g.sampling.max_new_tokens = static_cast<int>(session.budget_left());

    std::optional<std::string> trigger;
    StreamResult sr;
    try {
      sr = backend.generate_stream(g, [&](const StreamToken& tok) {
        session.observe(tok.text, tok.logprob);
        trigger = should_trigger(session, matcher);
        return !trigger.has_value();
      });
    } catch (const std::exception& e) {
      result.error = e.what();
      break;
    }
    if (!trigger) {
      if (sr.truncated) session.mark_truncated();
      break;
    }
    inject(session, templates, *trigger);
    if (branching) {
      try {
        branching::SpawnRequest sreq;
        sreq.model_id = request.model_id;
        sreq.question = request.question;
        sreq.real = request.context;
        sreq.noise = noise;
        sreq.prefix = session.emitted_texts();
        sreq.sampling = request.sampling;
        sreq.origin_step = session.emitted().size();
        sreq.branches = request.branching.branches;
        sreq.horizon = static_cast<int>(
            std::min<std::size_t>(static_cast<std::size_t>(request.branching.horizon), session.budget_left()));
        sreq.jobs = request.branching.jobs;
        if (sreq.horizon > 0) {
          auto set = branching::spawn_branches(sreq, backend);
          const auto winner = branching::select_branch(set);
          const std::size_t before = session.budget_used();
          for (const auto& t : set.branches[winner].tokens) session.observe(t.text, t.logprob);
          // observe() billed the winner; bill the losing branches on top
          const std::size_t winner_billed = session.budget_used() - before;
          session.charge(set.billed_tokens() - winner_billed);
          trace.branching.push_back(branching::to_log(set, winner));
        }
      } catch (const Error& e) {
        BranchLog log;
        log.origin_step = session.emitted().size();
        log.horizon = request.branching.horizon;
        log.warnings.push_back(std::string("branching skipped: ") + e.what());
        trace.branching.push_back(std::move(log));
      }
    }
  }

  trace.tokens = session.emitted();
  trace.injections = session.injections();
  trace.truncated = session.truncated();
  trace.generated_tokens = session.budget_used();
  if (result.error) trace.status = "error: " + *result.error;
  return result;
}

}  // namespace lookback::controller
