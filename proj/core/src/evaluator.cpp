#include "t2sc/evaluator.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "t2sc/pipelines.hpp"

namespace t2sc {

namespace {

using QuestionIndex = std::map<std::string, const Question*>;

QuestionIndex index_questions(std::span<const Question> dataset) {
  QuestionIndex idx;
  for (const auto& q : dataset) idx.emplace(q.id, &q);
  return idx;
}

const Question& lookup(const QuestionIndex& idx, const std::string& id) {
  auto it = idx.find(id);
  if (it == idx.end()) throw UnknownQuestion(id);
  return *it->second;
}

struct Tally {
  std::size_t correct = 0;
  std::size_t total = 0;
  double pct() const { return total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total); }
};

}  // namespace

const MethodScore* Report::find(const std::string& method) const {
  for (const auto& m : methods) {
    if (m.method == method) return &m;
  }
  return nullptr;
}

Report score_traces(std::span<const TraceRecord> records, std::span<const Question> dataset, const MatchConfig& cfg) {
  const QuestionIndex idx = index_questions(dataset);
  Report report;
  for (const auto& q : dataset) {
    if (std::find(report.db_ids.begin(), report.db_ids.end(), q.db_id) == report.db_ids.end()) {
      report.db_ids.push_back(q.db_id);
    }
  }

  // method -> run -> question -> record
  std::map<std::string, std::map<int, std::map<std::string, const TraceRecord*>>> grouped;
  for (const auto& r : records) {
    lookup(idx, r.question_id);
    auto& slot = grouped[r.method][r.run][r.question_id];
    if (slot) throw Error("duplicate trace for " + r.question_id + " in " + r.method + " run " + std::to_string(r.run));
    slot = &r;
  }

  for (const auto& [method, runs] : grouped) {
    MethodScore score;
    score.method = method;
    score.runs = static_cast<int>(runs.size());
    double calls = 0;
    std::map<std::string, double> db_sum;
    std::map<std::string, double> cat_sum;
    double overall_sum = 0;

    for (const auto& [run, by_question] : runs) {
      Tally overall;
      std::map<std::string, Tally> by_db;
      std::map<std::string, Tally> by_cat;
      std::size_t missing = 0;
      for (const auto& q : dataset) {
        bool correct = false;
        if (auto it = by_question.find(q.id); it != by_question.end()) {
          correct = predictions_match(it->second->prediction, Prediction(q.gold), cfg);
        } else {
          ++missing;
        }
        overall.total++;
        overall.correct += correct;
        by_db[q.db_id].total++;
        by_db[q.db_id].correct += correct;
        std::set<std::string> tags(q.categories.begin(), q.categories.end());
        for (const auto& tag : tags) {
          by_cat[tag].total++;
          by_cat[tag].correct += correct;
        }
      }
      if (missing > 0) {
        report.warnings.push_back(
            fmt::format("{} run {}: {} question(s) without a trace counted as incorrect", method, run, missing));
      }
      overall_sum += overall.pct();
      for (const auto& [db, t] : by_db) db_sum[db] += t.pct();
      for (const auto& [cat, t] : by_cat) cat_sum[cat] += t.pct();
      for (const auto& [qid, rec] : by_question) {
        calls += static_cast<double>(rec->llm_calls);
        ++score.traces;
      }
    }

    const double n_runs = static_cast<double>(runs.size());
    score.overall = overall_sum / n_runs;
    for (const auto& [db, s] : db_sum) score.by_db[db] = s / n_runs;
    for (const auto& [cat, s] : cat_sum) score.by_category[cat] = s / n_runs;
    score.mean_calls = score.traces == 0 ? 0.0 : calls / static_cast<double>(score.traces);

    if (runs.size() > 1) {
      const std::size_t widest = std::max_element(runs.begin(), runs.end(), [](const auto& a, const auto& b) {
                                   return a.second.size() < b.second.size();
                                 })->second.size();
      for (const auto& [run, by_question] : runs) {
        if (by_question.size() < widest) {
          report.warnings.push_back(fmt::format("{} run {} has fewer traces than other runs", method, run));
        }
      }
    }
    report.methods.push_back(std::move(score));
  }
  return report;
}

std::vector<TraceRecord> oracle_records(std::span<const TraceRecord> a, std::span<const TraceRecord> b,
                                        std::span<const Question> dataset, const MatchConfig& cfg) {
  const QuestionIndex idx = index_questions(dataset);
  auto key_by = [](std::span<const TraceRecord> recs, std::string& method) {
    std::map<std::pair<std::string, int>, const TraceRecord*> out;
    for (const auto& r : recs) {
      if (method.empty()) method = r.method;
      if (r.method != method) throw Error("oracle input mixes methods '" + method + "' and '" + r.method + "'");
      out[{r.question_id, r.run}] = &r;
    }
    return out;
  };
  std::string method_a, method_b;
  const auto ka = key_by(a, method_a);
  const auto kb = key_by(b, method_b);
  const std::string name = "oracle(" + method_a + "," + method_b + ")";

  std::vector<TraceRecord> out;
  for (const auto& [key, ra] : ka) {
    auto it = kb.find(key);
    if (it == kb.end()) continue;
    const TraceRecord& rb = *it->second;
    const OracleVerdict v = oracle_combine(*ra, rb, lookup(idx, key.first).gold, cfg);
    TraceRecord rec;
    rec.question_id = key.first;
    rec.method = name;
    rec.run = key.second;
    rec.prediction = v.prediction;
    rec.used_python = ra->used_python || rb.used_python;
    rec.llm_calls = ra->llm_calls + rb.llm_calls;
    out.push_back(std::move(rec));
  }
  return out;
}

RoutingRow routing_analysis(std::span<const TraceRecord> t2sc, std::span<const TraceRecord> reference,
                            std::span<const Question> dataset, const MatchConfig& cfg, int reference_run) {
  const QuestionIndex idx = index_questions(dataset);

  std::map<std::string, bool> ref_correct;
  for (const auto& r : reference) {
    if (r.run != reference_run) continue;
    const Question& q = lookup(idx, r.question_id);
    ref_correct[r.question_id] = predictions_match(r.prediction, Prediction(q.gold), cfg);
  }

  RoutingRow row;
  std::map<std::string, std::pair<std::size_t, std::size_t>> usage;  // used, runs
  for (const auto& r : t2sc) {
    lookup(idx, r.question_id);
    if (row.method.empty()) row.method = r.method;
    auto& u = usage[r.question_id];
    u.first += r.used_python;
    u.second += 1;
  }

  std::set<std::string> a, b;
  for (const auto& [q, _] : usage) a.insert(q);
  for (const auto& [q, _] : ref_correct) b.insert(q);
  if (a != b) {
    std::vector<std::string> diff;
    std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
    throw CoverageMismatch(fmt::format("routing inputs cover different questions ({} differ, e.g. '{}')",
                                       diff.size(), diff.front()));
  }
  if (a.empty()) throw CoverageMismatch("routing inputs are empty");

  double full = 0, on_correct = 0, on_incorrect = 0;
  for (const auto& [q, u] : usage) {
    const double frac = static_cast<double>(u.first) / static_cast<double>(u.second);
    full += frac;
    if (ref_correct.at(q)) {
      on_correct += frac;
      ++row.reference_correct;
    } else {
      on_incorrect += frac;
      ++row.reference_incorrect;
    }
  }
  row.questions = usage.size();
  row.pct_full = 100.0 * full / static_cast<double>(row.questions);
  if (row.reference_correct > 0) {
    row.delta_correct = 100.0 * on_correct / static_cast<double>(row.reference_correct) - row.pct_full;
  }
  if (row.reference_incorrect > 0) {
    row.delta_incorrect = 100.0 * on_incorrect / static_cast<double>(row.reference_incorrect) - row.pct_full;
  }
  return row;
}

}  // namespace t2sc
