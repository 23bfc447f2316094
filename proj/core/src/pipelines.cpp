#include "t2sc/pipelines.hpp"

#include <algorithm>
#include <cctype>

namespace t2sc {

namespace {

/// Snapshot of the ledger for one run key; calls made since are attributed
/// to the trace being built.
class CallWindow {
 public:
  explicit CallWindow(const RunContext& ctx) : ctx_(ctx), start_(ctx.ledger.by_tag(ctx.key)) {}

  void close(Trace& t) const {
    t.calls_by_tag.clear();
    t.llm_calls = 0;
    for (const auto& [tag, count] : ctx_.ledger.by_tag(ctx_.key)) {
      auto it = start_.find(tag);
      const std::size_t delta = count - (it == start_.end() ? 0 : it->second);
      if (delta == 0) continue;
      t.calls_by_tag[std::string(to_string(tag))] = delta;
      t.llm_calls += delta;
    }
  }

 private:
  const RunContext& ctx_;
  std::map<CallTag, std::size_t> start_;
};

Trace new_trace(const RunContext& ctx) {
  Trace t;
  t.question_id = ctx.question.id;
  t.method = ctx.key.method;
  t.run = ctx.key.run;
  return t;
}

/// Decomposer call plus repairs sharing the common repair budget.
std::optional<Decomposition> decompose(const RunContext& ctx, Trace& t) {
  const int budget = 1 + std::max(0, ctx.limits.max_repairs);
  std::string previous;
  std::string error;
  for (int attempt = 0; attempt < budget; ++attempt) {
    PromptExtras extras;
    extras.format_rules = ctx.entry.format_rules;
    std::string response;
    if (attempt == 0) {
      response = ctx.ask(PromptKind::Decomposer, CallTag::Decomposer, extras);
    } else {
      extras.artifact = previous;
      extras.error = error;
      response = ctx.ask(PromptKind::RepairDecomposer, CallTag::Decomposer, extras);
    }
    try {
      Decomposition d = parse_decomposition(response);
      t.decomposer_attempts.push_back({response, {}});
      return d;
    } catch (const DecompositionError& e) {
      error = e.reason() == DecompositionError::Reason::NoMarker
                  ? "the response has no 'Decomposition:' line followed by Text2SQL:/Python: steps"
                  : "the decomposition has no Text2SQL step; every plan must fetch data with at least one "
                    "Text2SQL step";
      previous = response;
      t.decomposer_attempts.push_back({response, error});
    }
  }
  return std::nullopt;
}

}  // namespace

// ------------------------------------------------------------------ methods

std::string MethodId::str() const {
  switch (kind) {
    case MethodKind::Knowledge: return "knowledge";
    case MethodKind::Text2Sql: return "text2sql";
    case MethodKind::SelfConsistency: return "sc:" + std::to_string(k);
    case MethodKind::T2scSingle: return "t2sc-single";
    case MethodKind::T2scMulti: return "t2sc-multi";
    case MethodKind::HybridSingle: return "hybrid-single";
    case MethodKind::HybridMulti: return "hybrid-multi";
  }
  return "unknown";
}

std::string MethodId::label() const {
  std::string s = str();
  std::replace(s.begin(), s.end(), ':', '-');
  return s;
}

bool MethodId::needs_sandbox() const {
  return kind == MethodKind::T2scSingle || kind == MethodKind::T2scMulti || kind == MethodKind::HybridSingle ||
         kind == MethodKind::HybridMulti;
}

MethodId MethodId::parse(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  static const std::pair<std::string_view, MethodKind> kNames[] = {
      {"knowledge", MethodKind::Knowledge},       {"text2sql", MethodKind::Text2Sql},
      {"t2sc-single", MethodKind::T2scSingle},    {"t2sc-multi", MethodKind::T2scMulti},
      {"hybrid-single", MethodKind::HybridSingle}, {"hybrid-multi", MethodKind::HybridMulti},
  };
  for (const auto& [name, kind] : kNames) {
    if (s == name) return {kind, 0};
  }
  if (s.starts_with("sc:") || s.starts_with("sc-")) {
    const std::string digits = s.substr(3);
    if (!digits.empty() && std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); }) &&
        digits.size() < 6) {
      const int k = std::stoi(digits);
      if (k < 2) throw Error("self-consistency needs K >= 2, got " + digits);
      return {MethodKind::SelfConsistency, k};
    }
  }
  throw Error("unknown method '" + std::string(text) + "'");
}

Trace run_knowledge(const RunContext& ctx) {
  CallWindow window(ctx);
  Trace t = new_trace(ctx);
  PromptExtras extras;
  extras.format_rules = ctx.entry.format_rules;
  const std::string response = ctx.ask(PromptKind::Knowledge, CallTag::Knowledge, extras);
  try {
    t.prediction = canonicalize_answer(response);
  } catch (const ParseError& e) {
    t.failure_reason = std::string("unparseable answer: ") + e.what();
  }
  window.close(t);
  return t;
}

Trace run_text2sql(const RunContext& ctx) {
  CallWindow window(ctx);
  Trace t = new_trace(ctx);
  t.sql_executions.push_back(run_sql_step_with_repair(ctx, ctx.question.text, false));
  const auto& exec = t.sql_executions.back();
  if (exec.ok()) {
    t.prediction = table_to_answer(*exec.final);
  } else {
    t.failure_reason = "sql failed after " + std::to_string(exec.attempts.size()) + " attempts";
  }
  window.close(t);
  return t;
}

Trace run_sc(const RunContext& ctx, int k, SeededRandom& rng) {
  if (k < 2) throw Error("self-consistency needs K >= 2");
  CallWindow window(ctx);
  Trace t = new_trace(ctx);
  std::vector<Prediction> predictions;
  for (int i = 0; i < k; ++i) {
    t.samples.push_back(run_text2sql(ctx));
    predictions.push_back(t.samples.back().prediction);
  }
  const MajorityResult vote = majority_answer(predictions, rng, ctx.match);
  t.prediction = vote.answer;
  t.is_majority = vote.is_majority;
  if (!t.prediction) t.failure_reason = "every sample failed";
  window.close(t);
  return t;
}

Trace run_t2sc_multi(const RunContext& ctx) {
  CallWindow window(ctx);
  Trace t = new_trace(ctx);

  t.decomposition = decompose(ctx, t);
  if (!t.decomposition) {
    t.failure_reason = "decomposition failed after " + std::to_string(t.decomposer_attempts.size()) + " attempts";
    window.close(t);
    return t;
  }
  const Decomposition& plan = *t.decomposition;
  for (const auto& w : plan.warnings) t.warnings.push_back(w);

  std::vector<ResultTable> tables;
  for (const auto& step : plan.sql_steps()) {
    t.sql_executions.push_back(run_sql_step_with_repair(ctx, step, true));
    if (!t.sql_executions.back().ok()) {
      t.failure_reason = "sql step " + std::to_string(t.sql_executions.size()) + " failed";
      window.close(t);
      return t;
    }
    tables.push_back(*t.sql_executions.back().final);
  }

  if (!plan.has_code_steps()) {
    if (tables.size() == 1) {
      t.prediction = table_to_answer(tables.front());
    } else {
      t.failure_reason = "several sql steps but no python step to combine them";
    }
    window.close(t);
    return t;
  }

  t.code_execution = run_code_with_repair(ctx, &tables, plan.render());
  t.used_python = ran_sandbox(t);
  if (t.code_execution->ok()) {
    t.prediction = t.code_execution->final;
  } else {
    t.failure_reason = "python failed after " + std::to_string(t.code_execution->attempts.size()) + " attempts";
  }
  window.close(t);
  return t;
}

Trace run_t2sc_single(const RunContext& ctx) {
  CallWindow window(ctx);
  Trace t = new_trace(ctx);
  t.code_execution = run_code_with_repair(ctx, nullptr);
  t.used_python = ran_sandbox(t);
  if (t.code_execution->ok()) {
    t.prediction = t.code_execution->final;
  } else {
    t.failure_reason = "python failed after " + std::to_string(t.code_execution->attempts.size()) + " attempts";
  }
  window.close(t);
  return t;
}

Trace run_hybrid(const RunContext& ctx, bool multi) {
  CallWindow window(ctx);
  Trace t = new_trace(ctx);
  for (int i = 0; i < 3; ++i) t.samples.push_back(run_text2sql(ctx));

  for (std::size_t i = 0; i < t.samples.size() && !t.routed_to_t2sc; ++i) {
    for (std::size_t j = i + 1; j < t.samples.size(); ++j) {
      if (predictions_match(t.samples[i].prediction, t.samples[j].prediction, ctx.match)) {
        t.prediction = t.samples[i].prediction;
        t.routed_to_t2sc = false;
        break;
      }
    }
  }

  if (!t.routed_to_t2sc) {
    t.routed_to_t2sc = true;
    Trace inner = multi ? run_t2sc_multi(ctx) : run_t2sc_single(ctx);
    t.decomposer_attempts = std::move(inner.decomposer_attempts);
    t.decomposition = std::move(inner.decomposition);
    t.sql_executions = std::move(inner.sql_executions);
    t.code_execution = std::move(inner.code_execution);
    t.prediction = std::move(inner.prediction);
    t.failure_reason = std::move(inner.failure_reason);
    t.warnings = std::move(inner.warnings);
  }
  t.used_python = ran_sandbox(t);
  window.close(t);
  return t;
}

Trace run_method(const MethodId& method, const RunContext& ctx, SeededRandom& rng) {
  switch (method.kind) {
    case MethodKind::Knowledge: return run_knowledge(ctx);
    case MethodKind::Text2Sql: return run_text2sql(ctx);
    case MethodKind::SelfConsistency: return run_sc(ctx, method.k, rng);
    case MethodKind::T2scSingle: return run_t2sc_single(ctx);
    case MethodKind::T2scMulti: return run_t2sc_multi(ctx);
    case MethodKind::HybridSingle: return run_hybrid(ctx, false);
    case MethodKind::HybridMulti: return run_hybrid(ctx, true);
  }
  throw Error("unknown method");
}

OracleVerdict oracle_combine(const TraceRecord& a, const TraceRecord& b, const AnswerSet& gold,
                             const MatchConfig& cfg) {
  if (a.question_id != b.question_id) {
    throw QuestionMismatch("oracle pairs traces of '" + a.question_id + "' and '" + b.question_id + "'");
  }
  OracleVerdict v{a.question_id, a.run, false, a.prediction};
  const Prediction g = gold;
  if (predictions_match(a.prediction, g, cfg)) {
    v.correct = true;
  } else if (predictions_match(b.prediction, g, cfg)) {
    v.correct = true;
    v.prediction = b.prediction;
  }
  return v;
}

}  // namespace t2sc
