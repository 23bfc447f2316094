#include "t2sc/trace.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

namespace t2sc {

namespace {

nlohmann::json sql_to_json(const SqlExecution& e) {
  auto attempts = nlohmann::json::array();
  for (const auto& a : e.attempts) {
    nlohmann::json j = {{"query", a.query}};
    if (const auto* t = std::get_if<ResultTable>(&a.outcome)) {
      j["outcome"] = "ok";
      j["columns"] = t->columns;
      j["row_count"] = t->row_count();
    } else if (const auto* err = std::get_if<SqlError>(&a.outcome)) {
      j["outcome"] = "error";
      j["error"] = err->message;
    } else {
      j["outcome"] = "timeout";
    }
    attempts.push_back(std::move(j));
  }
  return {{"step", e.step_text}, {"attempts", std::move(attempts)}, {"ok", e.ok()}};
}

nlohmann::json code_to_json(const CodeExecution& e) {
  auto attempts = nlohmann::json::array();
  for (const auto& a : e.attempts) {
    nlohmann::json j = {{"code", a.code}};
    if (a.result) j["sandbox"] = result_to_json(*a.result);
    if (!a.error.empty()) j["error"] = a.error;
    attempts.push_back(std::move(j));
  }
  return {{"attempts", std::move(attempts)}, {"ok", e.ok()}};
}

}  // namespace

bool ran_sandbox(const Trace& t) { return t.code_execution && t.code_execution->sandbox_runs() > 0; }

nlohmann::json trace_to_json(const Trace& t) {
  nlohmann::json j;
  j["question_id"] = t.question_id;
  j["method"] = t.method;
  j["run"] = t.run;
  j["prediction"] = t.prediction ? answer_to_json(*t.prediction) : nlohmann::json(nullptr);
  j["used_python"] = t.used_python;
  j["llm_calls"] = t.llm_calls;
  j["calls_by_tag"] = t.calls_by_tag;
  if (t.routed_to_t2sc) j["routed_to_t2sc"] = *t.routed_to_t2sc;
  if (t.is_majority) j["is_majority"] = *t.is_majority;
  if (!t.failure_reason.empty()) j["failure_reason"] = t.failure_reason;
  if (!t.warnings.empty()) j["warnings"] = t.warnings;
  if (!t.decomposer_attempts.empty()) {
    auto arr = nlohmann::json::array();
    for (const auto& a : t.decomposer_attempts) {
      nlohmann::json d = {{"response", a.response}};
      if (!a.error.empty()) d["error"] = a.error;
      arr.push_back(std::move(d));
    }
    j["decomposer_attempts"] = std::move(arr);
  }
  if (t.decomposition) {
    auto steps = nlohmann::json::array();
    for (const auto& s : t.decomposition->steps) {
      steps.push_back({{"kind", s.kind == StepKind::Sql ? "sql" : "python"}, {"text", s.text}});
    }
    j["decomposition"] = {{"steps", std::move(steps)}, {"warnings", t.decomposition->warnings}};
  }
  if (!t.sql_executions.empty()) {
    auto arr = nlohmann::json::array();
    for (const auto& e : t.sql_executions) arr.push_back(sql_to_json(e));
    j["sql"] = std::move(arr);
  }
  if (t.code_execution) j["code"] = code_to_json(*t.code_execution);
  if (!t.samples.empty()) {
    auto arr = nlohmann::json::array();
    for (const auto& s : t.samples) arr.push_back(trace_to_json(s));
    j["samples"] = std::move(arr);
  }
  if (t.elapsed) j["elapsed_ms"] = t.elapsed->count();
  return j;
}

TraceRecord record_of(const Trace& t) {
  return {t.question_id, t.method, t.run, t.prediction, t.used_python, t.llm_calls, t.routed_to_t2sc};
}

TraceRecord record_from_json(const nlohmann::json& doc) {
  TraceRecord r;
  try {
    r.question_id = doc.at("question_id").get<std::string>();
    r.method = doc.at("method").get<std::string>();
    r.run = doc.at("run").get<int>();
    const auto& p = doc.at("prediction");
    if (!p.is_null()) r.prediction = answer_from_json(p);
    r.used_python = doc.value("used_python", false);
    r.llm_calls = doc.value("llm_calls", std::size_t{0});
    if (auto it = doc.find("routed_to_t2sc"); it != doc.end() && !it->is_null()) r.routed_to_t2sc = it->get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed trace: ") + e.what());
  }
  return r;
}

nlohmann::json record_to_json(const TraceRecord& r) {
  nlohmann::json j;
  j["question_id"] = r.question_id;
  j["method"] = r.method;
  j["run"] = r.run;
  j["prediction"] = r.prediction ? answer_to_json(*r.prediction) : nlohmann::json(nullptr);
  j["used_python"] = r.used_python;
  j["llm_calls"] = r.llm_calls;
  if (r.routed_to_t2sc) j["routed_to_t2sc"] = *r.routed_to_t2sc;
  return j;
}

namespace {

void load_file(const std::filesystem::path& path, std::vector<TraceRecord>& out) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace

std::vector<TraceRecord> load_trace_records(const std::filesystem::path& path) {
  std::vector<TraceRecord> out;
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(path)) {
      const auto name = e.path().filename().string();
      if (e.is_regular_file() && name.starts_with("run") && e.path().extension() == ".jsonl") {
        files.push_back(e.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) load_file(f, out);
  } else {
    load_file(path, out);
  }
  return out;
}

}  // namespace t2sc
