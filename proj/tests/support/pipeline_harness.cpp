#include "pipeline_harness.hpp"

#include <fmt/format.h>

namespace t2sc::testing {

std::string sql_reply(const std::string& query) { return "```sql\n" + query + "\n```"; }

std::string python_reply(const std::string& body) {
  return "```python\nfrom typing import List, Tuple\n\ndef compute_result(listOfDFs):\n" + body + "\n```";
}

std::string plan_reply(std::initializer_list<std::string> steps) {
  std::string out = "Reasoning first.\nDecomposition:\n";
  for (const auto& s : steps) out += s + "\n";
  return out;
}

PipelineHarness::PipelineHarness(Sandbox* sandbox)
    : dir_("t2sc-pipeline"), accounting_(backend_, ledger_), sandbox_(sandbox) {
  db_path_ = dir_ / "scores.db";
  build_db(db_path_,
           "CREATE TABLE scores (id INTEGER PRIMARY KEY, name TEXT NOT NULL, value REAL);"
           "INSERT INTO scores VALUES (1, 'a', 1.5), (2, 'b', 2.5), (3, 'c', NULL), (4, 'd', 4.0);");
  entry_.db_id = "scores";
  entry_.path = db_path_;
  entry_.name = "Scores";
  db_.emplace(Database::open_read_only(db_path_));
  schema_ = introspect_schema(*db_, entry_);
  prompts_ = PromptLibrary::load(templates_dir(), ExemplarStore::load(exemplars_dir()));
  limits_.sql.timeout = std::chrono::milliseconds(5000);
}

const Question& PipelineHarness::question(const std::string& id, const std::string& gold_literal) {
  Question q;
  q.id = id;
  q.db_id = "scores";
  q.text = "Question " + id;
  q.gold = canonicalize_answer(gold_literal);
  return questions_.insert_or_assign(id, std::move(q)).first->second;
}

Trace PipelineHarness::run(const MethodId& method, const std::string& question_id, int run, std::uint64_t seed) {
  auto it = questions_.find(question_id);
  const Question& q = it == questions_.end() ? question(question_id) : it->second;
  RunContext ctx{.question = q,
                 .entry = entry_,
                 .db = *db_,
                 .schema = schema_,
                 .prompts = prompts_,
                 .llm = accounting_,
                 .ledger = ledger_,
                 .sandbox = sandbox_,
                 .key = RunKey{q.id, method.str(), run},
                 .model_id = "scripted",
                 .temperature = std::nullopt,
                 .limits = limits_,
                 .match = {},
                 .scratch_root = dir_ / "scratch"};
  SeededRandom rng(SeededRandom::derive(seed, fmt::format("{}/run{}/{}", q.id, run, method.str())));
  return run_method(method, ctx, rng);
}

std::size_t PipelineHarness::ledger_total(const MethodId& method, const std::string& question_id, int run) const {
  return ledger_.total(RunKey{question_id, method.str(), run});
}

SandboxResult ok_result(const std::string& text) {
  SandboxResult r;
  r.outcome = SandboxOutcome::Ok;
  r.result_text = text;
  return r;
}

SandboxResult error_result(const std::string& type, const std::string& message) {
  SandboxResult r;
  r.outcome = SandboxOutcome::ExecError;
  r.error.type = type;
  r.error.message = message;
  r.error.traceback = "Traceback (most recent call last):\n  File \"generated.py\", line 3\n" + type + ": " + message;
  return r;
}

}  // namespace t2sc::testing
