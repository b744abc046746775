#include "lookback/trace.hpp"

#include "lookback/error.hpp"

namespace lookback {

using nlohmann::json;

std::string_view to_string(Phase p) { return p == Phase::Thinking ? "thinking" : "answer"; }

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Medium: return "medium";
    case Difficulty::Hard: return "hard";
    case Difficulty::Unknown: return "unknown";
  }
  return "unknown";
}

Difficulty difficulty_from_string(std::string_view s) {
  if (s == "easy" || s == "Easy") return Difficulty::Easy;
  if (s == "medium" || s == "Medium") return Difficulty::Medium;
  if (s == "hard" || s == "Hard") return Difficulty::Hard;
  return Difficulty::Unknown;
}

std::vector<std::string> ThinkingTrace::token_texts() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.text);
  return out;
}

std::size_t ThinkingTrace::thinking_token_count() const {
  std::size_t n = 0;
  for (const auto& t : tokens) n += (t.phase == Phase::Thinking && !t.injected) ? 1 : 0;
  return n;
}

std::string ThinkingTrace::answer_text() const {
  std::string out;
  for (const auto& t : tokens) {
    if (t.phase == Phase::Answer) out += t.text;
  }
  return out;
}

std::string ThinkingTrace::full_text() const {
  std::string out;
  for (const auto& t : tokens) out += t.text;
  return out;
}

void validate(const ThinkingTrace& trace) {
  require(!trace.tokens.empty(), ErrorKind::Precondition, "trace '" + trace.question_id + "' has no tokens");
  bool answer = false;
  for (std::size_t i = 0; i < trace.tokens.size(); ++i) {
    if (trace.tokens[i].phase == Phase::Answer) answer = true;
    require(!(answer && trace.tokens[i].phase == Phase::Thinking), ErrorKind::Precondition,
            "trace '" + trace.question_id + "' has a thinking token at " + std::to_string(i) +
                " after the answer began");
  }
}

namespace {

json branch_to_json(const BranchLog& b) {
  json branches = json::array();
  for (const auto& e : b.branches) {
    branches.push_back({{"seed", e.seed},
                        {"tokens", e.tokens},
                        {"delta_content", e.delta_content},
                        {"score", e.score},
                        {"short", e.short_branch}});
  }
  return json{{"origin_step", b.origin_step}, {"horizon", b.horizon},          {"branches", branches},
              {"winner", b.winner},           {"overhead_tokens", b.overhead_tokens}, {"warnings", b.warnings}};
}

BranchLog branch_from_json(const json& j) {
  BranchLog b;
  b.origin_step = j.at("origin_step").get<std::size_t>();
  b.horizon = j.at("horizon").get<int>();
  for (const auto& e : j.at("branches")) {
    b.branches.push_back({e.at("seed").get<std::int64_t>(), e.at("tokens").get<std::vector<std::string>>(),
                          e.at("delta_content").get<std::vector<double>>(), e.at("score").get<double>(),
                          e.value("short", false)});
  }
  b.winner = j.at("winner").get<std::size_t>();
  b.overhead_tokens = j.at("overhead_tokens").get<std::size_t>();
  b.warnings = j.value("warnings", std::vector<std::string>{});
  return b;
}

}  // namespace

json to_json(const ThinkingTrace& t, bool with_branching) {
  json tokens = json::array();
  for (const auto& tok : t.tokens) {
    json jt{{"text", tok.text}, {"logprob", tok.logprob}, {"phase", to_string(tok.phase)}};
    if (tok.injected) jt["injected"] = true;
    tokens.push_back(std::move(jt));
  }
  json injections = json::array();
  for (const auto& inj : t.injections) {
    injections.push_back({{"position", inj.position}, {"template", inj.template_text}, {"trigger", inj.trigger}});
  }
  json j{{"question_id", t.question_id},
         {"pass_index", t.pass_index},
         {"model_id", t.model_id},
         {"category", t.category},
         {"difficulty", to_string(t.difficulty)},
         {"correct", t.correct ? json(*t.correct) : json(nullptr)},
         {"tokens", std::move(tokens)},
         {"injections", std::move(injections)},
         {"truncated", t.truncated},
         {"status", t.status},
         {"generated_tokens", t.generated_tokens}};
  if (with_branching) {
    json br = json::array();
    for (const auto& b : t.branching) br.push_back(branch_to_json(b));
    j["branching"] = std::move(br);
  }
  return j;
}

ThinkingTrace trace_from_json(const json& j) {
  ThinkingTrace t;
  try {
    t.question_id = j.at("question_id").get<std::string>();
    t.pass_index = j.value("pass_index", 0);
    t.model_id = j.value("model_id", std::string{});
    t.category = j.value("category", std::string{});
    t.difficulty = difficulty_from_string(j.value("difficulty", std::string{"unknown"}));
    if (j.contains("correct") && !j["correct"].is_null()) t.correct = j["correct"].get<bool>();
    for (const auto& jt : j.at("tokens")) {
      TraceToken tok;
      tok.text = jt.at("text").get<std::string>();
      tok.logprob = jt.value("logprob", 0.0);
      tok.phase = jt.value("phase", std::string{"thinking"}) == "answer" ? Phase::Answer : Phase::Thinking;
      tok.injected = jt.value("injected", false);
      t.tokens.push_back(std::move(tok));
    }
    if (j.contains("injections")) {
      for (const auto& ji : j["injections"]) {
        t.injections.push_back({ji.at("position").get<std::size_t>(), ji.at("template").get<std::string>(),
                                ji.value("trigger", std::string{})});
      }
    }
    if (j.contains("branching")) {
      for (const auto& jb : j["branching"]) t.branching.push_back(branch_from_json(jb));
    }
    t.truncated = j.value("truncated", false);
    t.status = j.value("status", std::string{"ok"});
    t.generated_tokens = j.value("generated_tokens", std::size_t{0});
  } catch (const json::exception& e) {
    fail(ErrorKind::Io, std::string("malformed trace record: ") + e.what());
  }
  return t;
}

json to_json(const Question& q) {
  return json{{"id", q.id},         {"text", q.text},         {"image", q.image},
              {"answer", q.answer}, {"category", q.category}, {"difficulty", to_string(q.difficulty)}};
}

Question question_from_json(const json& j) {
  Question q;
  try {
    q.id = j.at("id").get<std::string>();
    q.text = j.at("text").get<std::string>();
    q.image = j.value("image", std::string{});
    q.answer = j.value("answer", std::string{});
    q.category = j.value("category", std::string{});
    q.difficulty = difficulty_from_string(j.value("difficulty", std::string{"unknown"}));
  } catch (const json::exception& e) {
    fail(ErrorKind::Io, std::string("malformed question record: ") + e.what());
  }
  return q;
}

}  // namespace lookback
