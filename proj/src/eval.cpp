#include "lookback/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

#include "lookback/error.hpp"
#include "lookback/text.hpp"

namespace lookback::eval {

using nlohmann::json;

void validate(const EvalRecord& r) {
  require(r.thinking_tokens <= r.total_tokens, ErrorKind::Precondition,
          "eval record '" + r.question_id + "' has more thinking tokens than total tokens");
  require(r.pass_index >= 0, ErrorKind::Precondition, "eval record '" + r.question_id + "' has a negative pass index");
}

json to_json(const EvalRecord& r) {
  return json{{"question_id", r.question_id},   {"category", r.category},
              {"difficulty", to_string(r.difficulty)}, {"pass_index", r.pass_index},
              {"correct", r.correct},           {"total_tokens", r.total_tokens},
              {"thinking_tokens", r.thinking_tokens},  {"method_id", r.method_id}};
}

EvalRecord record_from_json(const json& j) {
  EvalRecord r;
  try {
    r.question_id = j.at("question_id").get<std::string>();
    r.category = j.value("category", std::string{});
    r.difficulty = difficulty_from_string(j.value("difficulty", std::string{"unknown"}));
    r.pass_index = j.at("pass_index").get<int>();
    r.correct = j.at("correct").get<bool>();
    r.total_tokens = j.at("total_tokens").get<std::size_t>();
    r.thinking_tokens = j.value("thinking_tokens", std::size_t{0});
    r.method_id = j.value("method_id", std::string{});
  } catch (const json::exception& e) {
    fail(ErrorKind::Io, std::string("malformed eval record: ") + e.what());
  }
  validate(r);
  return r;
}

// ---------------------------------------------------------------------------

namespace {

std::optional<std::uint64_t> binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 c = 1;
  for (int i = 0; i < k; ++i) {
    c = c * static_cast<unsigned>(n - i) / static_cast<unsigned>(i + 1);
    if (c > (static_cast<unsigned __int128>(1) << 53)) return std::nullopt;
  }
  return static_cast<std::uint64_t>(c);
}

}  // namespace

double pass_at_k(int n, int c, int k) {
  require(n >= 1, ErrorKind::Domain, "pass@k needs n >= 1");
  require(c >= 0 && c <= n, ErrorKind::Domain, "pass@k needs 0 <= c <= n");
  require(k >= 1, ErrorKind::Domain, "pass@k needs k >= 1");
  if (k > n) fail(ErrorKind::Domain, "pass@k needs k <= n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  if (n - c < k) return 1.0;
  auto all = binomial(n, k);
  auto none = binomial(n - c, k);
  if (all && none) {
    // exact count of k-subsets containing a correct pass, one rounding
    return static_cast<double>(*all - *none) / static_cast<double>(*all);
  }
  double miss = 1.0;
  for (int i = n - c + 1; i <= n; ++i) miss *= 1.0 - static_cast<double>(k) / static_cast<double>(i);
  return 1.0 - miss;
}

std::vector<PassAtKPoint> pass_at_k_curves(std::span<const EvalRecord> records) {
  // method -> question -> (n, c)
  std::map<std::string, std::map<std::string, std::pair<int, int>>> tally;
  for (const auto& r : records) {
    auto& nc = tally[r.method_id][r.question_id];
    ++nc.first;
    nc.second += r.correct ? 1 : 0;
  }
  std::vector<PassAtKPoint> out;
  for (const auto& [method, questions] : tally) {
    int max_n = 0;
    for (const auto& [q, nc] : questions) max_n = std::max(max_n, nc.first);
    for (int k = 1; k <= max_n; ++k) {
      double sum = 0.0;
      std::size_t count = 0;
      for (const auto& [q, nc] : questions) {
        if (nc.first < k) continue;
        sum += pass_at_k(nc.first, nc.second, k);
        ++count;
      }
      out.push_back({method, k, count ? sum / static_cast<double>(count) : 0.0, count});
    }
  }
  return out;
}

std::string pass_at_k_csv(std::span<const PassAtKPoint> points) {
  std::ostringstream os;
  os << std::setprecision(17) << "method,k,pass_at_k,questions\n";
  for (const auto& p : points) os << p.method_id << ',' << p.k << ',' << p.value << ',' << p.questions << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------

ZScores category_zscores(std::vector<std::string> categories, std::vector<std::string> methods,
                         const std::vector<std::vector<double>>& mean_acc) {
  require(methods.size() >= 2, ErrorKind::Domain, "z-scores need at least 2 methods per category");
  require(mean_acc.size() == categories.size(), ErrorKind::Precondition, "one accuracy row per category required");
  ZScores out;
  out.categories = std::move(categories);
  out.methods = std::move(methods);
  for (const auto& row : mean_acc) {
    require(row.size() == out.methods.size(), ErrorKind::Precondition, "one accuracy column per method required");
    const double n = static_cast<double>(row.size());
    const double mean = std::accumulate(row.begin(), row.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : row) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / n);
    std::vector<double> z(row.size(), 0.0);
    const bool degenerate = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
    if (!degenerate) {
      for (std::size_t i = 0; i < row.size(); ++i) z[i] = (row[i] - mean) / sd;
    }
    out.z.push_back(std::move(z));
    out.degenerate.push_back(degenerate);
  }
  return out;
}

ZScores category_zscores(std::span<const EvalRecord> records) {
  std::set<std::string> cats, methods;
  std::map<std::pair<std::string, std::string>, std::pair<double, double>> acc;  // (cat, method) -> (correct, n)
  for (const auto& r : records) {
    cats.insert(r.category);
    methods.insert(r.method_id);
    auto& a = acc[{r.category, r.method_id}];
    a.first += r.correct ? 1.0 : 0.0;
    a.second += 1.0;
  }
  std::vector<std::vector<double>> matrix;
  for (const auto& c : cats) {
    std::vector<double> row;
    for (const auto& m : methods) {
      auto it = acc.find({c, m});
      require(it != acc.end(), ErrorKind::Coverage, "method '" + m + "' has no records in category '" + c + "'");
      row.push_back(100.0 * it->second.first / it->second.second);
    }
    matrix.push_back(std::move(row));
  }
  return category_zscores({cats.begin(), cats.end()}, {methods.begin(), methods.end()}, matrix);
}

std::string zscores_csv(const ZScores& z) {
  std::ostringstream os;
  os << std::setprecision(17) << "category";
  for (const auto& m : z.methods) os << ',' << m;
  os << ",degenerate\n";
  for (std::size_t i = 0; i < z.categories.size(); ++i) {
    os << '"' << z.categories[i] << '"';
    for (double v : z.z[i]) os << ',' << v;
    os << ',' << (z.degenerate[i] ? "true" : "false") << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------

namespace {

double median_of(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  const std::size_t n = end - begin;
  const std::size_t mid = begin + n / 2;
  return n % 2 == 1 ? v[mid] : (v[mid - 1] + v[mid]) / 2.0;
}

}  // namespace

FiveNumber five_number(std::vector<double> values) {
  require(!values.empty(), ErrorKind::EmptyInput, "five-number summary of an empty group");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  FiveNumber f;
  f.n = n;
  f.min = values.front();
  f.max = values.back();
  f.median = median_of(values, 0, n);
  if (n == 1) {
    f.q1 = f.q3 = values[0];
    return f;
  }
  const std::size_t half = n / 2;
  f.q1 = median_of(values, 0, half);
  f.q3 = median_of(values, n - half, n);
  return f;
}

Footprint token_footprint(std::span<const EvalRecord> records) {
  std::map<FootprintKey, std::vector<double>> groups;
  std::set<std::string> methods;
  for (const auto& r : records) {
    methods.insert(r.method_id);
    groups[{r.method_id, r.difficulty, r.correct}].push_back(static_cast<double>(r.total_tokens));
  }
  Footprint f;
  for (const auto& m : methods) {
    for (auto d : {Difficulty::Easy, Difficulty::Medium, Difficulty::Hard, Difficulty::Unknown}) {
      for (bool c : {true, false}) {
        auto it = groups.find({m, d, c});
        if (it == groups.end()) {
          f.omitted.push_back(m + "/" + std::string(to_string(d)) + "/" + (c ? "correct" : "wrong"));
          continue;
        }
        f.groups.emplace(it->first, five_number(it->second));
      }
    }
  }
  return f;
}

std::string footprint_csv(const Footprint& f) {
  std::ostringstream os;
  os << std::setprecision(17) << "method,difficulty,correctness,n,min,q1,median,q3,max\n";
  for (const auto& [k, s] : f.groups) {
    os << k.method_id << ',' << to_string(k.difficulty) << ',' << (k.correct ? "correct" : "wrong") << ',' << s.n
       << ',' << s.min << ',' << s.q1 << ',' << s.median << ',' << s.q3 << ',' << s.max << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------

std::string format_cell(double value, double delta) {
  char buf[64];
  double shown = std::round(delta * 10.0) / 10.0;
  if (shown == 0.0) shown = 0.0;  // no "-0.0"
  std::snprintf(buf, sizeof buf, "%.1f(%+.1f)", value, shown);
  return buf;
}

namespace {

struct Scope {
  std::map<std::string, std::pair<double, double>> per_question;  // question -> (correct, passes)
  double tokens = 0.0;
};

std::map<std::string, Scope> tally_scopes(std::span<const EvalRecord> records, Pass1Mode mode) {
  std::map<std::string, Scope> scopes;
  for (const auto& r : records) {
    std::vector<std::string> own{"overall"};
    if (r.category != "overall") own.push_back(r.category);
    for (const auto& scope : own) {
      auto& s = scopes[scope];
      s.tokens += static_cast<double>(r.total_tokens);
      if (mode == Pass1Mode::FirstPassOnly && r.pass_index != 0) continue;
      auto& q = s.per_question[r.question_id];
      q.first += r.correct ? 1.0 : 0.0;
      q.second += 1.0;
    }
  }
  return scopes;
}

double pass1_of(const Scope& s) {
  if (s.per_question.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [q, cp] : s.per_question) sum += cp.first / cp.second;
  return 100.0 * sum / static_cast<double>(s.per_question.size());
}

}  // namespace

ComparisonReport comparison_report(std::span<const EvalRecord> method, std::span<const EvalRecord> original,
                                   const std::vector<std::string>& categories, Pass1Mode mode) {
  require(!method.empty() && !original.empty(), ErrorKind::EmptyInput, "comparison needs records for both methods");
  std::set<std::string> a, b;
  for (const auto& r : method) a.insert(r.question_id);
  for (const auto& r : original) b.insert(r.question_id);
  if (a != b) {
    std::vector<std::string> diff;
    std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
    std::string list;
    for (std::size_t i = 0; i < diff.size() && i < 20; ++i) list += (i ? ", " : "") + diff[i];
    if (diff.size() > 20) list += ", ...";
    fail(ErrorKind::Coverage, "record sets cover different questions (" + std::to_string(diff.size()) +
                                  " in the symmetric difference: " + list + ")");
  }

  const auto ours = tally_scopes(method, mode);
  const auto base = tally_scopes(original, mode);

  std::vector<std::string> scopes{"overall"};
  if (categories.empty()) {
    for (const auto& [name, s] : base) {
      if (name != "overall") scopes.push_back(name);
    }
  } else {
    scopes.insert(scopes.end(), categories.begin(), categories.end());
  }

  ComparisonReport report;
  report.method_id = method.front().method_id;
  report.baseline_id = original.front().method_id;
  report.mode = mode;
  for (const auto& scope : scopes) {
    auto ob = base.find(scope);
    auto om = ours.find(scope);
    require(ob != base.end() && om != ours.end(), ErrorKind::Coverage, "no records for category '" + scope + "'");
    require(ob->second.tokens > 0.0, ErrorKind::Domain, "original method used zero tokens in '" + scope + "'");
    ComparisonRow row;
    row.scope = scope;
    row.questions = ob->second.per_question.size();
    row.original.pass1 = pass1_of(ob->second);
    row.original.pct_tokens = 100.0 * ob->second.tokens / ob->second.tokens;
    row.method.pass1 = pass1_of(om->second);
    row.method.pct_tokens = 100.0 * om->second.tokens / ob->second.tokens;
    row.method.delta_pass1 = row.method.pass1 - row.original.pass1;
    row.method.delta_tokens = row.method.pct_tokens - row.original.pct_tokens;
    report.rows.push_back(row);
  }
  return report;
}

std::string report_csv(std::span<const ComparisonReport> reports) {
  std::ostringstream os;
  os << std::setprecision(17)
     << "method,baseline,scope,questions,pass1,pct_tokens,delta_pass1,delta_tokens,pass1_cell,tokens_cell\n";
  for (const auto& r : reports) {
    for (const auto& row : r.rows) {
      const auto& c = row.method;
      os << r.method_id << ',' << r.baseline_id << ",\"" << row.scope << "\"," << row.questions << ',' << c.pass1
         << ',' << c.pct_tokens << ',' << c.delta_pass1 << ',' << c.delta_tokens << ','
         << format_cell(c.pass1, c.delta_pass1) << ',' << format_cell(c.pct_tokens, c.delta_tokens) << '\n';
    }
  }
  return os.str();
}

std::string report_text(std::span<const ComparisonReport> reports) {
  if (reports.empty()) return {};
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header{"Method"};
  for (const auto& row : reports.front().rows) {
    header.push_back(row.scope + " Pass@1");
    header.push_back(row.scope + " %Tokens");
  }
  table.push_back(header);
  std::vector<std::string> base{reports.front().baseline_id};
  for (const auto& row : reports.front().rows) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", row.original.pass1);
    base.push_back(buf);
    std::snprintf(buf, sizeof buf, "%.1f", row.original.pct_tokens);
    base.push_back(buf);
  }
  table.push_back(base);
  for (const auto& r : reports) {
    std::vector<std::string> line{r.method_id};
    for (const auto& row : r.rows) {
      line.push_back(format_cell(row.method.pass1, row.method.delta_pass1));
      line.push_back(format_cell(row.method.pct_tokens, row.method.delta_tokens));
    }
    table.push_back(line);
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : table) {
    for (std::size_t i = 0; i < line.size() && i < width.size(); ++i) width[i] = std::max(width[i], line[i].size());
  }
  std::ostringstream os;
  for (const auto& line : table) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      os << std::left << std::setw(static_cast<int>(width[i])) << line[i] << (i + 1 < line.size() ? "  " : "");
    }
    os << '\n';
  }
  return os.str();
}

json to_json(const ComparisonReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    auto cell = [](const ComparisonCell& c) {
      return json{{"pass1", c.pass1},
                  {"pct_tokens", c.pct_tokens},
                  {"delta_pass1", c.delta_pass1},
                  {"delta_tokens", c.delta_tokens},
                  {"pass1_cell", format_cell(c.pass1, c.delta_pass1)},
                  {"tokens_cell", format_cell(c.pct_tokens, c.delta_tokens)}};
    };
    rows.push_back({{"scope", row.scope},
                    {"questions", row.questions},
                    {"original", cell(row.original)},
                    {"method", cell(row.method)}});
  }
  return json{{"method", r.method_id},
              {"baseline", r.baseline_id},
              {"pass1_mode", r.mode == Pass1Mode::MeanOverPasses ? "mean_over_passes" : "first_pass_only"},
              {"rows", rows}};
}

// ---------------------------------------------------------------------------

namespace {

std::optional<std::string> last_boxed(const std::string& s) {
  const std::string key = "\\boxed{";
  auto pos = s.rfind(key);
  if (pos == std::string::npos) return std::nullopt;
  std::size_t i = pos + key.size();
  int depth = 1;
  std::string out;
  for (; i < s.size(); ++i) {
    if (s[i] == '{') ++depth;
    if (s[i] == '}' && --depth == 0) return out;
    out.push_back(s[i]);
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> extract_answer(const std::string& response, const AnswerPatterns& patterns) {
  if (auto boxed = last_boxed(response)) return boxed;
  for (const auto& p : patterns.patterns) {
    std::regex re;
    try {
      re = std::regex(p, std::regex::ECMAScript | std::regex::multiline);
    } catch (const std::regex_error& e) {
      fail(ErrorKind::Config, "invalid answer pattern '" + p + "': " + e.what());
    }
    std::optional<std::string> last;
    for (auto it = std::sregex_iterator(response.begin(), response.end(), re); it != std::sregex_iterator(); ++it) {
      if (it->size() > 1 && (*it)[1].matched) last = (*it)[1].str();
    }
    if (last) return last;
  }
  return std::nullopt;
}

std::string normalize_answer(std::string_view answer) {
  std::string out;
  for (char c : answer) {
    if (text::is_space(c) || c == '$') continue;
    out.push_back(static_cast<unsigned char>(c) < 0x80 ? static_cast<char>(std::tolower(static_cast<unsigned char>(c))) : c);
  }
  while (!out.empty() && (out.back() == '.' || out.back() == ')')) out.pop_back();
  while (!out.empty() && out.front() == '(') out.erase(out.begin());
  return out;
}

bool judge(const std::string& response, const std::string& gold, const AnswerPatterns& patterns) {
  auto got = extract_answer(response, patterns);
  return got && !gold.empty() && normalize_answer(*got) == normalize_answer(gold);
}

EvalRecord record_from_trace(const ThinkingTrace& trace, const std::string& method_id, bool correct) {
  EvalRecord r;
  r.question_id = trace.question_id;
  r.category = trace.category;
  r.difficulty = trace.difficulty;
  r.pass_index = trace.pass_index;
  r.correct = correct;
  std::size_t sampled = 0;
  for (const auto& t : trace.tokens) sampled += t.injected ? 0 : 1;
  r.total_tokens = std::max(trace.generated_tokens, sampled);
  r.thinking_tokens = std::min(trace.thinking_token_count(), r.total_tokens);
  r.method_id = method_id;
  return r;
}

}  // namespace lookback::eval
