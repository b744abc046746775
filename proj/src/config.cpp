#include "lookback/config.hpp"

#include <filesystem>
#include <set>
#include <sstream>

#include "lookback/error.hpp"
#include "lookback/jsonl.hpp"
#include "lookback/text.hpp"

namespace lookback::config {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && text::is_space(s[b])) ++b;
  while (e > b && text::is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

/// Cursor-based reader for a single value.
struct ValueReader {
  std::string_view s;
  std::size_t i = 0;

  void skip_ws() {
    while (i < s.size() && text::is_space(s[i])) ++i;
  }

  json read() {
    skip_ws();
    require(i < s.size(), ErrorKind::Config, "missing value");
    char c = s[i];
    if (c == '"') return read_basic_string();
    if (c == '\'') return read_literal_string();
    if (c == '[') return read_array();
    return read_scalar();
  }

  json read_basic_string() {
    ++i;
    std::string out;
    while (i < s.size() && s[i] != '"') {
      char c = s[i++];
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      require(i < s.size(), ErrorKind::Config, "dangling escape in string");
      char e = s[i++];
      switch (e) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        default: fail(ErrorKind::Config, std::string("unsupported escape \\") + e);
      }
    }
    require(i < s.size(), ErrorKind::Config, "unterminated string");
    ++i;
    return out;
  }

  json read_literal_string() {
    ++i;
    auto end = s.find('\'', i);
    require(end != std::string_view::npos, ErrorKind::Config, "unterminated literal string");
    std::string out(s.substr(i, end - i));
    i = end + 1;
    return out;
  }

  json read_array() {
    ++i;
    json arr = json::array();
    while (true) {
      skip_ws();
      require(i < s.size(), ErrorKind::Config, "unterminated array");
      if (s[i] == ']') {
        ++i;
        return arr;
      }
      arr.push_back(read());
      skip_ws();
      require(i < s.size(), ErrorKind::Config, "unterminated array");
      if (s[i] == ',') ++i;
      else require(s[i] == ']', ErrorKind::Config, "expected ',' or ']' in array");
    }
  }

  json read_scalar() {
    std::size_t start = i;
    while (i < s.size() && s[i] != ',' && s[i] != ']' && !text::is_space(s[i])) ++i;
    std::string tok(s.substr(start, i - start));
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string digits;
    for (char c : tok) {
      if (c != '_') digits.push_back(c);
    }
    try {
      std::size_t used = 0;
      if (digits.find_first_of(".eE") == std::string::npos || digits.find_first_of("xX") != std::string::npos) {
        long long v = std::stoll(digits, &used, 10);
        if (used == digits.size()) return v;
      } else {
        double v = std::stod(digits, &used);
        if (used == digits.size()) return v;
      }
    } catch (const std::exception&) {
    }
    fail(ErrorKind::Config, "cannot parse value '" + tok + "'");
  }
};

std::string strip_comment(const std::string& line) {
  bool in_basic = false, in_literal = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_basic) {
      if (c == '\\') ++i;
      else if (c == '"') in_basic = false;
    } else if (in_literal) {
      if (c == '\'') in_literal = false;
    } else if (c == '"') {
      in_basic = true;
    } else if (c == '\'') {
      in_literal = true;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

}  // namespace

json parse_value(const std::string& raw) {
  const std::string t = trim(raw);
  try {
    ValueReader r{t};
    json v = r.read();
    r.skip_ws();
    if (r.i == t.size()) return v;
  } catch (const Error&) {
  }
  return t;
}

json parse_toml(const std::string& content, const std::string& origin) {
  json tree = json::object();
  std::string section;
  std::istringstream in(content);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    std::string t = trim(strip_comment(line));
    if (t.empty()) continue;
    if (t.front() == '[') {
      require(t.back() == ']' && t.size() > 2, ErrorKind::Config, where + "malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      if (!tree.contains(section)) tree[section] = json::object();
      continue;
    }
    auto eq = t.find('=');
    require(eq != std::string::npos, ErrorKind::Config, where + "expected key = value");
    std::string key = trim(t.substr(0, eq));
    require(!key.empty(), ErrorKind::Config, where + "empty key");
    try {
      ValueReader r{std::string_view(t).substr(eq + 1)};
      json v = r.read();
      r.skip_ws();
      require(r.i == r.s.size(), ErrorKind::Config, "trailing characters after value");
      tree[section][key] = std::move(v);
    } catch (const Error& e) {
      fail(ErrorKind::Config, where + e.what());
    }
  }
  return tree;
}

void apply_override(json& tree, const std::string& assignment) {
  auto eq = assignment.find('=');
  require(eq != std::string::npos, ErrorKind::Config, "override '" + assignment + "' must look like section.key=value");
  std::string path = trim(assignment.substr(0, eq));
  auto dot = path.find('.');
  std::string section = dot == std::string::npos ? std::string() : path.substr(0, dot);
  std::string key = dot == std::string::npos ? path : path.substr(dot + 1);
  tree[section][key] = parse_value(assignment.substr(eq + 1));
}

// ---------------------------------------------------------------------------

namespace {

class SectionReader {
 public:
  SectionReader(const json& tree, const std::string& name) : name_(name) {
    if (tree.contains(name)) {
      require(tree[name].is_object(), ErrorKind::Config, "[" + name + "] must be a table");
      section_ = tree[name];
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!section_.contains(key)) return;
    try {
      out = section_[key].get<T>();
    } catch (const json::exception&) {
      fail(ErrorKind::Config, "[" + name_ + "] " + key + " has the wrong type");
    }
  }

  bool has(const char* key) const { return section_.contains(key); }

  void finish() const {
    for (const auto& [key, v] : section_.items()) {
      require(seen_.count(key) > 0, ErrorKind::Config, "unknown key '" + key + "' in [" + name_ + "]");
    }
  }

 private:
  std::string name_;
  json section_ = json::object();
  std::set<std::string> seen_;
};

const std::set<std::string> kSections{"backend", "sampling", "budgets", "controller", "branching",
                                      "probe",   "miner",    "eval",    "paths"};

}  // namespace

RunConfig from_tree(const json& tree, const std::string& base_dir) {
  for (const auto& [name, v] : tree.items()) {
    if (name.empty()) {
      require(v.empty(), ErrorKind::Config, "keys outside a [section] are not supported");
      continue;
    }
    require(kSections.count(name) > 0, ErrorKind::Config, "unknown section [" + name + "]");
  }

  RunConfig c;
  c.base_dir = base_dir;
  {
    SectionReader r(tree, "backend");
    r.get("base_url", c.backend.base_url);
    r.get("model_id", c.backend.model_id);
    r.get("auth_env_var", c.backend.auth_env_var);
    r.get("max_retries", c.backend.max_retries);
    r.get("retry_base_ms", c.backend.retry_base_ms);
    r.get("in_flight", c.backend.in_flight);
    r.finish();
  }
  {
    SectionReader r(tree, "sampling");
    r.get("temperature", c.sampling.temperature);
    r.get("top_p", c.sampling.top_p);
    r.get("n_passes", c.sampling.n_passes);
    r.get("seed", c.sampling.seed);
    r.get("mode", c.sampling.mode);
    r.finish();
  }
  {
    SectionReader r(tree, "budgets");
    r.get("instruct_max", c.budgets.instruct_max);
    r.get("thinking_max", c.budgets.thinking_max);
    r.finish();
  }
  {
    SectionReader r(tree, "controller");
    std::string policy(controller::to_string(c.controller.template_policy));
    r.get("enabled", c.controller_enabled);
    r.get("suffix_len", c.controller.suffix_len);
    r.get("cooldown_window", c.controller.cooldown_window);
    r.get("max_injections", c.controller.max_injections);
    r.get("template_policy", policy);
    r.get("answer_markers", c.controller.answer_markers);
    r.get("think_close_marker", c.controller.think_close_marker);
    r.get("template_seed", c.controller.template_seed);
    r.finish();
    c.controller.template_policy = controller::template_policy_from_string(policy);
  }
  {
    SectionReader r(tree, "branching");
    r.get("enabled", c.branching.enabled);
    r.get("M", c.branching.m);
    r.get("H", c.branching.h);
    r.finish();
  }
  {
    SectionReader r(tree, "probe");
    r.get("q_presence", c.probe.quantiles.presence);
    r.get("q_content", c.probe.quantiles.content);
    r.get("q_grounded", c.probe.quantiles.grounded);
    r.get("bins", c.probe.bins);
    r.get("max_tokens", c.probe.max_tokens);
    r.get("noise_mean", c.probe.noise_mean);
    r.get("noise_std", c.probe.noise_std);
    const int manual = int(r.has("presence_abs")) + int(r.has("content_abs")) + int(r.has("grounded"));
    require(manual == 0 || manual == 3, ErrorKind::Config,
            "[probe] manual thresholds need all of presence_abs, content_abs and grounded");
    probe::Thresholds t;
    r.get("presence_abs", t.presence_abs);
    r.get("content_abs", t.content_abs);
    r.get("grounded", t.grounded);
    if (manual == 3) c.probe.manual = t;
    r.finish();
  }
  {
    SectionReader r(tree, "miner");
    r.get("pause_n_min", c.miner.pause.n_min);
    r.get("pause_n_max", c.miner.pause.n_max);
    r.get("template_n_min", c.miner.templates.n_min);
    r.get("template_n_max", c.miner.templates.n_max);
    std::size_t support = c.miner.pause.min_support;
    double enrichment = c.miner.pause.min_enrichment;
    r.get("min_support", support);
    r.get("min_enrichment", enrichment);
    c.miner.pause.min_support = c.miner.templates.min_support = support;
    c.miner.pause.min_enrichment = c.miner.templates.min_enrichment = enrichment;
    r.get("use_fallback_template", c.miner.use_fallback_template);
    r.get("fallback_template", c.miner.fallback_template);
    r.finish();
  }
  {
    SectionReader r(tree, "eval");
    std::string mode = "mean_over_passes";
    r.get("method_id", c.eval.method_id);
    r.get("pass1_mode", mode);
    r.get("answer_patterns", c.eval.answer_patterns.patterns);
    r.finish();
    if (mode == "mean_over_passes") c.eval.pass1_mode = eval::Pass1Mode::MeanOverPasses;
    else if (mode == "first_pass_only") c.eval.pass1_mode = eval::Pass1Mode::FirstPassOnly;
    else fail(ErrorKind::Config, "[eval] pass1_mode must be mean_over_passes or first_pass_only");
  }
  {
    SectionReader r(tree, "paths");
    r.get("questions", c.paths.questions);
    r.get("traces", c.paths.traces);
    r.get("probe_records", c.paths.probe_records);
    r.get("curves", c.paths.curves);
    r.get("vocab", c.paths.vocab);
    r.get("eval_records", c.paths.eval_records);
    r.get("reports", c.paths.reports);
    r.get("work", c.paths.work);
    r.get("original", c.paths.original);
    r.get("baselines", c.paths.baselines);
    r.finish();
  }
  c.validate();
  return c;
}

std::string RunConfig::resolve(const std::string& path) const {
  if (path.empty()) return path;
  fs::path p(path);
  if (p.is_absolute()) return p.string();
  return (fs::path(base_dir) / p).lexically_normal().string();
}

void RunConfig::validate() const {
  require(budgets.instruct_max > 0 && budgets.thinking_max > 0, ErrorKind::Config, "token budgets must be positive");
  require(sampling.n_passes >= 1, ErrorKind::Config, "sampling.n_passes must be >= 1");
  require(sampling.mode == "thinking" || sampling.mode == "instruct", ErrorKind::Config,
          "sampling.mode must be 'thinking' or 'instruct'");
  require(sampling.top_p > 0.0 && sampling.top_p <= 1.0, ErrorKind::Config, "sampling.top_p must lie in (0,1]");
  require(sampling.temperature >= 0.0, ErrorKind::Config, "sampling.temperature must be >= 0");
  require(backend.in_flight >= 1, ErrorKind::Config, "backend.in_flight must be >= 1");
  require(backend.max_retries >= 0, ErrorKind::Config, "backend.max_retries must be >= 0");
  require(!branching.enabled || (branching.m >= 2 && branching.h > 0), ErrorKind::Config,
          "branching needs M >= 2 and H > 0");
  require(probe.bins >= 2, ErrorKind::Config, "probe.bins must be >= 2");
  for (double q : {probe.quantiles.presence, probe.quantiles.content, probe.quantiles.grounded}) {
    require(q >= 0.0 && q <= 1.0, ErrorKind::Config, "probe quantile levels must lie in [0,1]");
  }
  controller.validate();
}

json RunConfig::to_json() const {
  json j;
  j["backend"] = {{"base_url", backend.base_url},         {"model_id", backend.model_id},
                  {"auth_env_var", backend.auth_env_var}, {"max_retries", backend.max_retries},
                  {"retry_base_ms", backend.retry_base_ms}, {"in_flight", backend.in_flight}};
  j["sampling"] = {{"temperature", sampling.temperature}, {"top_p", sampling.top_p},
                   {"n_passes", sampling.n_passes},       {"seed", sampling.seed},
                   {"mode", sampling.mode}};
  j["budgets"] = {{"instruct_max", budgets.instruct_max}, {"thinking_max", budgets.thinking_max}};
  j["controller"] = {{"enabled", controller_enabled},
                     {"suffix_len", controller.suffix_len},
                     {"cooldown_window", controller.cooldown_window},
                     {"max_injections", controller.max_injections},
                     {"template_policy", controller::to_string(controller.template_policy)},
                     {"answer_markers", controller.answer_markers},
                     {"think_close_marker", controller.think_close_marker},
                     {"template_seed", controller.template_seed}};
  j["branching"] = {{"enabled", branching.enabled}, {"M", branching.m}, {"H", branching.h}};
  j["probe"] = {{"q_presence", probe.quantiles.presence}, {"q_content", probe.quantiles.content},
                {"q_grounded", probe.quantiles.grounded}, {"bins", probe.bins},
                {"max_tokens", probe.max_tokens},         {"noise_mean", probe.noise_mean},
                {"noise_std", probe.noise_std}};
  if (probe.manual) {
    j["probe"]["presence_abs"] = probe.manual->presence_abs;
    j["probe"]["content_abs"] = probe.manual->content_abs;
    j["probe"]["grounded"] = probe.manual->grounded;
  }
  j["miner"] = {{"pause_n_min", miner.pause.n_min},
                {"pause_n_max", miner.pause.n_max},
                {"template_n_min", miner.templates.n_min},
                {"template_n_max", miner.templates.n_max},
                {"min_support", miner.pause.min_support},
                {"min_enrichment", miner.pause.min_enrichment},
                {"use_fallback_template", miner.use_fallback_template},
                {"fallback_template", miner.fallback_template}};
  j["eval"] = {{"method_id", eval.method_id},
               {"pass1_mode", eval.pass1_mode == eval::Pass1Mode::MeanOverPasses ? "mean_over_passes"
                                                                                  : "first_pass_only"},
               {"answer_patterns", eval.answer_patterns.patterns}};
  j["paths"] = {{"questions", paths.questions}, {"traces", paths.traces},
                {"probe_records", paths.probe_records}, {"curves", paths.curves},
                {"vocab", paths.vocab},         {"eval_records", paths.eval_records},
                {"reports", paths.reports},     {"work", paths.work},
                {"original", paths.original},   {"baselines", paths.baselines}};
  return j;
}

std::string RunConfig::hash() const { return text::hex64(text::fnv1a64(to_json().dump())); }

RunConfig load(const std::string& path, const std::vector<std::string>& overrides) {
  require(fs::exists(path), ErrorKind::Config, "config file '" + path + "' does not exist");
  json tree = parse_toml(jsonl::read_file(path), path);
  for (const auto& o : overrides) apply_override(tree, o);
  auto base = fs::path(path).parent_path();
  return from_tree(tree, base.empty() ? "." : base.string());
}

}  // namespace lookback::config
