#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "t2sc/answer.hpp"
#include "t2sc/code_executor.hpp"
#include "t2sc/prompting.hpp"
#include "t2sc/sql_executor.hpp"

namespace t2sc {

struct DecomposerAttempt {
  std::string response;
  /// Empty when the response parsed.
  std::string error;
};

/// Full record of one method run on one question.
struct Trace {
  std::string question_id;
  std::string method;
  int run = 0;

  std::vector<DecomposerAttempt> decomposer_attempts;
  std::optional<Decomposition> decomposition;
  std::vector<SqlExecution> sql_executions;
  std::optional<CodeExecution> code_execution;
  /// Independent samples for self-consistency and hybrid methods.
  std::vector<Trace> samples;

  bool used_python = false;
  Prediction prediction;
  std::size_t llm_calls = 0;
  std::map<std::string, std::size_t> calls_by_tag;
  std::optional<bool> routed_to_t2sc;
  std::optional<bool> is_majority;
  std::string failure_reason;
  std::vector<std::string> warnings;
  std::optional<std::chrono::milliseconds> elapsed;
};

/// Sandbox attempts in the run's own code execution.
bool ran_sandbox(const Trace& t);

/// Serializes a trace. Result tables are summarized by columns and row count.
nlohmann::json trace_to_json(const Trace& t);

/// The fields scoring and routing need, as read back from a trace line.
struct TraceRecord {
  std::string question_id;
  std::string method;
  int run = 0;
  Prediction prediction;
  bool used_python = false;
  std::size_t llm_calls = 0;
  std::optional<bool> routed_to_t2sc;
};

TraceRecord record_of(const Trace& t);
/// Throws Error for lines that are not trace documents.
TraceRecord record_from_json(const nlohmann::json& doc);
nlohmann::json record_to_json(const TraceRecord& r);

/// Reads trace JSONL files; a directory is searched recursively for *.jsonl.
std::vector<TraceRecord> load_trace_records(const std::filesystem::path& path);

}  // namespace t2sc
