#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "lookback/trace.hpp"

namespace lookback::eval {

struct EvalRecord {
  std::string question_id;
  std::string category;
  Difficulty difficulty = Difficulty::Unknown;
  int pass_index = 0;
  bool correct = false;
  std::size_t total_tokens = 0;
  std::size_t thinking_tokens = 0;
  std::string method_id;
  bool operator==(const EvalRecord&) const = default;
};

void validate(const EvalRecord& r);
nlohmann::json to_json(const EvalRecord& r);
EvalRecord record_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// pass@k

/// Unbiased estimator 1 - C(n-c, k) / C(n, k). Exact integer arithmetic while
/// the binomials fit in 64 bits, the stable product form otherwise.
double pass_at_k(int n, int c, int k);

struct PassAtKPoint {
  std::string method_id;
  int k = 0;
  double value = 0.0;       // mean over questions with at least k passes
  std::size_t questions = 0;
};

std::vector<PassAtKPoint> pass_at_k_curves(std::span<const EvalRecord> records);
std::string pass_at_k_csv(std::span<const PassAtKPoint> points);

// ---------------------------------------------------------------------------
// category z-scores

struct ZScores {
  std::vector<std::string> categories;  // rows
  std::vector<std::string> methods;     // columns
  std::vector<std::vector<double>> z;
  std::vector<bool> degenerate;  // constant row, mapped to zeros
};

/// Standardizes each row with the population standard deviation.
ZScores category_zscores(std::vector<std::string> categories, std::vector<std::string> methods,
                         const std::vector<std::vector<double>>& mean_acc);

/// Mean accuracy (percent) per (category, method) from records, then z-scored.
ZScores category_zscores(std::span<const EvalRecord> records);

std::string zscores_csv(const ZScores& z);

// ---------------------------------------------------------------------------
// token footprints

struct FiveNumber {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
  std::size_t n = 0;
};

/// Quartiles by the median-exclusive rule: Q1/Q3 are medians of the halves
/// below/above the median position (the median itself excluded for odd n).
FiveNumber five_number(std::vector<double> values);

struct FootprintKey {
  std::string method_id;
  Difficulty difficulty = Difficulty::Unknown;
  bool correct = false;
  auto operator<=>(const FootprintKey&) const = default;
};

struct Footprint {
  std::map<FootprintKey, FiveNumber> groups;
  std::vector<std::string> omitted;  // empty (method, difficulty, correctness) groups
};

Footprint token_footprint(std::span<const EvalRecord> records);
std::string footprint_csv(const Footprint& f);

// ---------------------------------------------------------------------------
// Comparison report

enum class Pass1Mode { MeanOverPasses, FirstPassOnly };

struct ComparisonCell {
  double pass1 = 0.0;       // percent
  double pct_tokens = 0.0;  // percent of the original's tokens
  double delta_pass1 = 0.0;
  double delta_tokens = 0.0;
};

/// "value(+delta)" with one decimal, e.g. "69.7(+2.7)" or "57.2(-42.8)".
std::string format_cell(double value, double delta);

struct ComparisonRow {
  std::string scope;  // "overall" or a category
  ComparisonCell original;
  ComparisonCell method;
  std::size_t questions = 0;
};

struct ComparisonReport {
  std::string method_id;
  std::string baseline_id;
  Pass1Mode mode = Pass1Mode::MeanOverPasses;
  std::vector<ComparisonRow> rows;
};

/// Throws Coverage when the two record sets cover different question ids.
ComparisonReport comparison_report(std::span<const EvalRecord> method, std::span<const EvalRecord> original,
                                   const std::vector<std::string>& categories = {},
                                   Pass1Mode mode = Pass1Mode::MeanOverPasses);

std::string report_csv(std::span<const ComparisonReport> reports);
std::string report_text(std::span<const ComparisonReport> reports);
nlohmann::json to_json(const ComparisonReport& r);

// ---------------------------------------------------------------------------
// Answer judging

struct AnswerPatterns {
  // Regexes with one capture group, tried in order after \boxed{...}.
  std::vector<std::string> patterns{R"((?:Final Answer|Answer)\s*[:：]?\s*\(?([A-Za-z0-9][^\n]*?)\)?\s*$)",
                                    R"(\(([A-J])\))", R"(\b([A-J])\b)"};
};

std::optional<std::string> extract_answer(const std::string& response, const AnswerPatterns& patterns = {});
std::string normalize_answer(std::string_view answer);
bool judge(const std::string& response, const std::string& gold, const AnswerPatterns& patterns = {});

EvalRecord record_from_trace(const ThinkingTrace& trace, const std::string& method_id, bool correct);

}  // namespace lookback::eval
