#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "t2sc/dataset.hpp"
#include "t2sc/llm_backend.hpp"
#include "t2sc/pipelines.hpp"
#include "t2sc/prompting.hpp"
#include "t2sc/run_context.hpp"
#include "t2sc/sandbox.hpp"
#include "t2sc/schema_context.hpp"

namespace t2sc {

struct BatchConfig {
  std::vector<Question> questions;
  const DbRegistry* registry = nullptr;
  const PromptLibrary* prompts = nullptr;
  LlmBackend* backend = nullptr;
  Sandbox* sandbox = nullptr;
  MethodId method;
  int runs = 3;
  std::uint64_t seed = 0;
  int workers = 1;
  ExecutionLimits limits;
  MatchConfig match;
  IntrospectOptions introspect;
  std::string model_id = "default";
  std::optional<double> temperature;
  std::filesystem::path out_dir;
  /// Adds wall-clock durations to traces, which makes them non-reproducible.
  bool record_timings = false;
  /// Store rendered prompts in the replay log.
  bool keep_prompts = true;
};

struct BatchResult {
  std::size_t completed = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
  std::vector<std::string> errors;

  bool complete() const noexcept { return failed == 0; }
};

/// Trace file of one run: <out>/traces/<method label>/run<r>.jsonl
std::filesystem::path trace_file(const std::filesystem::path& out_dir, const MethodId& method, int run);

/// Runs `method` on every (question, run) pair that has no trace yet under
/// out_dir, using a pool of `workers` threads. Trace files are rewritten in
/// dataset order and the replay log in (scope, tag, occurrence) order, so the
/// output does not depend on scheduling. Pairs that raise (transport, auth,
/// exhausted script) are listed in <out>/resume.json and left for a rerun.
/// Throws Error for configuration problems.
BatchResult run_batch(const BatchConfig& cfg);

}  // namespace t2sc
