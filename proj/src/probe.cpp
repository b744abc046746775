#include "lookback/probe.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "lookback/error.hpp"

namespace lookback::probe {

using nlohmann::json;

std::vector<ProbeRecord> step_perplexities(const ThinkingTrace& trace, const ScoreResponse& real,
                                           const ScoreResponse& noise, const ScoreResponse& absent) {
  validate(trace);
  const std::size_t S = trace.tokens.size();
  auto check = [&](const ScoreResponse& r, const char* name) {
    if (r.tokens.size() != S) {
      fail(ErrorKind::Alignment, std::string(name) + " context scores have " + std::to_string(r.tokens.size()) +
                                     " tokens but trace '" + trace.question_id + "' has " + std::to_string(S));
    }
  };
  check(real, "real");
  check(noise, "noise");
  check(absent, "absent");

  std::vector<ProbeRecord> out;
  out.reserve(S);
  for (std::size_t i = 0; i < S; ++i) {
    ProbeRecord r;
    r.question_id = trace.question_id;
    r.pass_index = trace.pass_index;
    r.model_id = trace.model_id;
    r.correct = trace.correct;
    r.step = i + 1;
    r.total_steps = S;
    r.ppl_real = perplexity(real.tokens[i].logprob);
    r.ppl_noise = perplexity(noise.tokens[i].logprob);
    r.ppl_absent = perplexity(absent.tokens[i].logprob);
    r.delta_content = r.ppl_real - r.ppl_noise;
    r.delta_presence = r.ppl_noise - r.ppl_absent;
    r.norm_pos = 100.0 * static_cast<double>(r.step) / static_cast<double>(S);
    out.push_back(std::move(r));
  }
  return out;
}

json to_json(const ProbeRecord& r) {
  return json{{"question_id", r.question_id},
              {"pass_index", r.pass_index},
              {"model_id", r.model_id},
              {"correct", r.correct ? json(*r.correct) : json(nullptr)},
              {"step", r.step},
              {"total_steps", r.total_steps},
              {"ppl_real", r.ppl_real},
              {"ppl_noise", r.ppl_noise},
              {"ppl_absent", r.ppl_absent},
              {"delta_content", r.delta_content},
              {"delta_presence", r.delta_presence},
              {"norm_pos", r.norm_pos}};
}

ProbeRecord record_from_json(const json& j) {
  ProbeRecord r;
  try {
    r.question_id = j.at("question_id").get<std::string>();
    r.pass_index = j.at("pass_index").get<int>();
    r.model_id = j.value("model_id", std::string{});
    if (j.contains("correct") && !j["correct"].is_null()) r.correct = j["correct"].get<bool>();
    r.step = j.at("step").get<std::size_t>();
    r.total_steps = j.at("total_steps").get<std::size_t>();
    r.ppl_real = j.at("ppl_real").get<double>();
    r.ppl_noise = j.at("ppl_noise").get<double>();
    r.ppl_absent = j.at("ppl_absent").get<double>();
    r.delta_content = j.at("delta_content").get<double>();
    r.delta_presence = j.at("delta_presence").get<double>();
    r.norm_pos = j.at("norm_pos").get<double>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Io, std::string("malformed probe record: ") + e.what());
  }
  return r;
}

std::string group_key(const ProbeRecord& r, GroupBy by) {
  std::string key;
  if (by.model_id) key += "model=" + r.model_id;
  if (by.correctness) {
    if (!key.empty()) key += '|';
    key += "correct=";
    key += r.correct ? (*r.correct ? "true" : "false") : "unknown";
  }
  return key.empty() ? "all" : key;
}

std::size_t bin_index(double norm_pos, int bins) {
  auto k = static_cast<std::size_t>(std::floor(norm_pos / 100.0 * bins));
  return std::min(k, static_cast<std::size_t>(bins - 1));
}

namespace {

struct Accumulator {
  std::vector<double> values;

  CurvePoint finish(double lo, double hi) const {
    CurvePoint p{lo, hi, std::nullopt, std::nullopt, values.size()};
    if (values.empty()) return p;
    double sum = 0.0;
    for (double v : values) sum += v;
    const double n = static_cast<double>(values.size());
    const double mean = sum / n;
    p.mean = mean;
    if (values.size() >= 2) {
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      p.stderr_ = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    return p;
  }
};

}  // namespace

DeltaCurves aggregate_delta_curves(std::span<const ProbeRecord> records, GroupBy by, int bins) {
  require(bins >= 2, ErrorKind::Precondition, "need at least 2 bins");
  require(!records.empty(), ErrorKind::EmptyInput, "no probe records to aggregate");

  struct GroupAcc {
    std::vector<Accumulator> content, presence;
    std::map<std::size_t, Accumulator> content_step, presence_step;
  };
  std::map<std::string, GroupAcc> acc;
  for (const auto& r : records) {
    require(r.norm_pos >= 0.0 && r.norm_pos <= 100.0, ErrorKind::Precondition,
            "norm_pos out of [0,100] for '" + r.question_id + "'");
    auto& g = acc[group_key(r, by)];
    if (g.content.empty()) {
      g.content.resize(static_cast<std::size_t>(bins));
      g.presence.resize(static_cast<std::size_t>(bins));
    }
    const auto k = bin_index(r.norm_pos, bins);
    g.content[k].values.push_back(r.delta_content);
    g.presence[k].values.push_back(r.delta_presence);
    g.content_step[r.step].values.push_back(r.delta_content);
    g.presence_step[r.step].values.push_back(r.delta_presence);
  }

  DeltaCurves curves;
  curves.bins = bins;
  const double width = 100.0 / bins;
  for (const auto& [key, g] : acc) {
    GroupCurves gc;
    for (int k = 0; k < bins; ++k) {
      const double lo = width * k, hi = (k + 1 == bins) ? 100.0 : width * (k + 1);
      gc.content.push_back(g.content[static_cast<std::size_t>(k)].finish(lo, hi));
      gc.presence.push_back(g.presence[static_cast<std::size_t>(k)].finish(lo, hi));
    }
    for (const auto& [s, a] : g.content_step) {
      gc.content_by_step.push_back(a.finish(static_cast<double>(s), static_cast<double>(s)));
    }
    for (const auto& [s, a] : g.presence_step) {
      gc.presence_by_step.push_back(a.finish(static_cast<double>(s), static_cast<double>(s)));
    }
    curves.groups.emplace(key, std::move(gc));
  }
  return curves;
}

std::string curves_to_csv(const DeltaCurves& curves) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "group,bin_lo,bin_hi,series,mean,stderr,n\n";
  auto emit = [&](const std::string& group, const char* series, const std::vector<CurvePoint>& pts) {
    for (const auto& p : pts) {
      os << '"' << group << "\"," << p.lo << ',' << p.hi << ',' << series << ',';
      if (p.mean) os << *p.mean; else os << "null";
      os << ',';
      if (p.stderr_) os << *p.stderr_; else os << "null";
      os << ',' << p.n << '\n';
    }
  };
  for (const auto& [group, g] : curves.groups) {
    emit(group, "delta_content", g.content);
    emit(group, "delta_presence", g.presence);
    emit(group, "delta_content_by_step", g.content_by_step);
    emit(group, "delta_presence_by_step", g.presence_by_step);
  }
  return os.str();
}

std::string_view to_string(StepFlag f) {
  switch (f) {
    case StepFlag::PresenceSensitive: return "presence_sensitive";
    case StepFlag::ContentGrounded: return "content_grounded";
    case StepFlag::Neutral: return "neutral";
  }
  return "neutral";
}

double quantile(std::vector<double> values, double q) {
  require(!values.empty(), ErrorKind::EmptyInput, "quantile of an empty set");
  require(q >= 0.0 && q <= 1.0, ErrorKind::Precondition, "quantile level must lie in [0,1]");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Thresholds quantile_thresholds(std::span<const ProbeRecord> records, QuantileLevels levels) {
  if (records.size() < kMinRecordsForQuantiles) {
    fail(ErrorKind::InsufficientData,
         "only " + std::to_string(records.size()) + " probe records; quantile thresholds need at least " +
             std::to_string(kMinRecordsForQuantiles) + ". Supply explicit thresholds instead.");
  }
  std::vector<double> abs_presence, abs_content, content;
  abs_presence.reserve(records.size());
  abs_content.reserve(records.size());
  content.reserve(records.size());
  for (const auto& r : records) {
    abs_presence.push_back(std::abs(r.delta_presence));
    abs_content.push_back(std::abs(r.delta_content));
    content.push_back(r.delta_content);
  }
  return {quantile(std::move(abs_presence), levels.presence), quantile(std::move(abs_content), levels.content),
          quantile(std::move(content), levels.grounded)};
}

StepFlag classify(const ProbeRecord& r, const Thresholds& t) {
  const double ap = std::abs(r.delta_presence);
  if (ap > 0.0 && ap >= t.presence_abs && std::abs(r.delta_content) <= t.content_abs) {
    return StepFlag::PresenceSensitive;
  }
  if (r.delta_content < 0.0 && r.delta_content <= t.grounded) return StepFlag::ContentGrounded;
  return StepFlag::Neutral;
}

std::vector<StepFlag> flag_steps(std::span<const ProbeRecord> records, const Thresholds& t) {
  std::vector<StepFlag> flags;
  flags.reserve(records.size());
  for (const auto& r : records) flags.push_back(classify(r, t));
  return flags;
}

std::vector<StepFlag> flag_steps(std::span<const ProbeRecord> records, QuantileLevels levels) {
  return flag_steps(records, quantile_thresholds(records, levels));
}

json to_json(const Thresholds& t) {
  return json{{"presence_abs", t.presence_abs}, {"content_abs", t.content_abs}, {"grounded", t.grounded}};
}

}  // namespace lookback::probe
