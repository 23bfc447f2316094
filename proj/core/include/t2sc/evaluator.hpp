#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "t2sc/answer.hpp"
#include "t2sc/dataset.hpp"
#include "t2sc/error.hpp"
#include "t2sc/trace.hpp"

namespace t2sc {

class UnknownQuestion : public Error {
 public:
  explicit UnknownQuestion(const std::string& id) : Error("trace refers to unknown question '" + id + "'") {}
};

class CoverageMismatch : public Error {
 public:
  using Error::Error;
};

struct MethodScore {
  std::string method;
  /// Percentages in [0, 100], averaged over runs.
  double overall = 0;
  std::map<std::string, double> by_db;
  std::map<std::string, double> by_category;
  double mean_calls = 0;
  int runs = 0;
  std::size_t traces = 0;

  friend bool operator==(const MethodScore&, const MethodScore&) = default;
};

struct Report {
  std::vector<std::string> db_ids;
  std::vector<MethodScore> methods;
  std::vector<std::string> warnings;

  const MethodScore* find(const std::string& method) const;
  friend bool operator==(const Report&, const Report&) = default;
};

/// Scores every method present in `records`. Within one run a question is
/// correct iff its prediction matches gold; a question without a trace in a
/// run counts as incorrect and is reported in warnings. Accuracy is computed
/// per run and then averaged; overall is question-weighted.
/// Throws UnknownQuestion.
Report score_traces(std::span<const TraceRecord> records, std::span<const Question> dataset,
                    const MatchConfig& cfg = {});

/// Oracle records pairing A and B by (question, run). Method name is
/// "oracle(A,B)". Pairs missing on either side are skipped.
std::vector<TraceRecord> oracle_records(std::span<const TraceRecord> a, std::span<const TraceRecord> b,
                                        std::span<const Question> dataset, const MatchConfig& cfg = {});

struct RoutingRow {
  std::string method;
  std::size_t questions = 0;
  std::size_t reference_correct = 0;
  std::size_t reference_incorrect = 0;
  /// Percentage of questions whose run used the code sandbox.
  double pct_full = 0;
  /// Subset percentage minus pct_full, in percentage points. Unset for an
  /// empty subset.
  std::optional<double> delta_correct;
  std::optional<double> delta_incorrect;

  friend bool operator==(const RoutingRow&, const RoutingRow&) = default;
};

/// Splits questions by whether the reference Text2SQL run (`reference_run`)
/// was correct and compares routing rates. When a question has several
/// Text2SQLCode runs its routing value is the fraction of runs that used
/// python. Throws CoverageMismatch when the two sets cover different
/// questions.
RoutingRow routing_analysis(std::span<const TraceRecord> t2sc, std::span<const TraceRecord> reference,
                            std::span<const Question> dataset, const MatchConfig& cfg = {}, int reference_run = 0);

nlohmann::json report_to_json(const Report& r);
Report report_from_json(const nlohmann::json& doc);
/// Method | Overall | one column per database | Calls. One decimal.
std::string report_to_markdown(const Report& r);
/// Category accuracy table, one row per method.
std::string categories_to_markdown(const Report& r);

nlohmann::json routing_to_json(const std::vector<RoutingRow>& rows);
std::vector<RoutingRow> routing_from_json(const nlohmann::json& doc);
std::string routing_to_markdown(const std::vector<RoutingRow>& rows);

/// One-decimal rendering used in every export.
std::string format_pct(double value);
/// Signed one-decimal rendering, e.g. "+2.5", "-4.8".
std::string format_delta(double value);

}  // namespace t2sc
