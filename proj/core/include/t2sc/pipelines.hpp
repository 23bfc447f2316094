#pragma once

#include <string>
#include <string_view>

#include "t2sc/answer.hpp"
#include "t2sc/random.hpp"
#include "t2sc/run_context.hpp"
#include "t2sc/trace.hpp"

namespace t2sc {

enum class MethodKind { Knowledge, Text2Sql, SelfConsistency, T2scSingle, T2scMulti, HybridSingle, HybridMulti };

struct MethodId {
  MethodKind kind = MethodKind::Text2Sql;
  /// Sample count for SelfConsistency.
  int k = 0;

  /// knowledge | text2sql | sc:K | t2sc-single | t2sc-multi | hybrid-single | hybrid-multi
  std::string str() const;
  /// str() with ':' replaced, usable as a directory name.
  std::string label() const;
  bool needs_sandbox() const;
  /// Accepts str() forms and label() forms. Throws Error; K must be >= 2.
  static MethodId parse(std::string_view text);

  friend bool operator==(const MethodId&, const MethodId&) = default;
};

Trace run_knowledge(const RunContext& ctx);
Trace run_text2sql(const RunContext& ctx);
Trace run_sc(const RunContext& ctx, int k, SeededRandom& rng);
Trace run_t2sc_single(const RunContext& ctx);
Trace run_t2sc_multi(const RunContext& ctx);
/// Three Text2SQL samples; if any two match, their answer is taken,
/// otherwise the chosen Text2SQLCode variant answers.
Trace run_hybrid(const RunContext& ctx, bool multi);

/// Dispatches on `method`. The trace's method field is method.str().
Trace run_method(const MethodId& method, const RunContext& ctx, SeededRandom& rng);

class QuestionMismatch : public Error {
 public:
  using Error::Error;
};

struct OracleVerdict {
  std::string question_id;
  int run = 0;
  bool correct = false;
  /// The prediction credited to the oracle: A's when correct, else B's when
  /// correct, else A's.
  Prediction prediction;
};

/// Correct iff either prediction matches gold. Throws QuestionMismatch when
/// the records belong to different questions.
OracleVerdict oracle_combine(const TraceRecord& a, const TraceRecord& b, const AnswerSet& gold,
                             const MatchConfig& cfg = {});

}  // namespace t2sc
