#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lookback/backend.hpp"
#include "lookback/trace.hpp"

namespace lookback::probe {

/// Per-token perplexities of one trace step under the real image, a noise
/// image and no image, with the two contrasts derived from them.
struct ProbeRecord {
  std::string question_id;
  int pass_index = 0;
  std::string model_id;
  std::optional<bool> correct;
  std::size_t step = 0;         // 1-based
  std::size_t total_steps = 0;  // S
  double ppl_real = 0.0;
  double ppl_noise = 0.0;
  double ppl_absent = 0.0;
  double delta_content = 0.0;   // ppl_real - ppl_noise
  double delta_presence = 0.0;  // ppl_noise - ppl_absent
  double norm_pos = 0.0;        // 100 * step / S

  bool operator==(const ProbeRecord&) const = default;
};

inline double perplexity(double logprob) { return std::exp(-logprob); }

std::vector<ProbeRecord> step_perplexities(const ThinkingTrace& trace, const ScoreResponse& real,
                                           const ScoreResponse& noise, const ScoreResponse& absent);

nlohmann::json to_json(const ProbeRecord& r);
ProbeRecord record_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Aggregation

struct GroupBy {
  bool correctness = true;
  bool model_id = true;
};

std::string group_key(const ProbeRecord& r, GroupBy by);

struct CurvePoint {
  double lo = 0.0;  // bin bounds in percent, or the raw step for by-step curves
  double hi = 0.0;
  std::optional<double> mean;    // null for empty bins
  std::optional<double> stderr_;  // null when fewer than two values
  std::size_t n = 0;
};

struct GroupCurves {
  std::vector<CurvePoint> content;
  std::vector<CurvePoint> presence;
  std::vector<CurvePoint> content_by_step;
  std::vector<CurvePoint> presence_by_step;
};

struct DeltaCurves {
  int bins = 0;
  std::map<std::string, GroupCurves> groups;
};

inline constexpr int kDefaultBins = 50;

/// Bin k covers [100k/bins, 100(k+1)/bins); the last bin is closed at 100.
std::size_t bin_index(double norm_pos, int bins);

DeltaCurves aggregate_delta_curves(std::span<const ProbeRecord> records, GroupBy by = {}, int bins = kDefaultBins);

/// Columns: group,bin_lo,bin_hi,series,mean,stderr,n. Empty cells are "null".
std::string curves_to_csv(const DeltaCurves& curves);

// ---------------------------------------------------------------------------
// Step flags

enum class StepFlag { PresenceSensitive, ContentGrounded, Neutral };

std::string_view to_string(StepFlag f);

struct QuantileLevels {
  double presence = 0.90;  // of |delta_presence|
  double content = 0.50;   // of |delta_content|
  double grounded = 0.10;  // of signed delta_content
};

struct Thresholds {
  double presence_abs = 0.0;  // flag needs |delta_presence| >= this
  double content_abs = 0.0;   // ... and |delta_content| <= this
  double grounded = 0.0;      // content grounded needs delta_content <= this
};

inline constexpr std::size_t kMinRecordsForQuantiles = 100;

/// Linear-interpolation sample quantile (R type 7).
double quantile(std::vector<double> values, double q);

Thresholds quantile_thresholds(std::span<const ProbeRecord> records, QuantileLevels levels = {});

/// PresenceSensitive: |dp| >= presence_abs and |dc| <= content_abs and dp != 0.
/// ContentGrounded: dc <= grounded and dc < 0. PresenceSensitive wins ties.
StepFlag classify(const ProbeRecord& r, const Thresholds& t);

std::vector<StepFlag> flag_steps(std::span<const ProbeRecord> records, const Thresholds& t);
std::vector<StepFlag> flag_steps(std::span<const ProbeRecord> records, QuantileLevels levels = {});

nlohmann::json to_json(const Thresholds& t);

}  // namespace lookback::probe
