#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "t2sc/dataset.hpp"
#include "t2sc/database.hpp"
#include "t2sc/llm_backend.hpp"
#include "t2sc/prompting.hpp"
#include "t2sc/sandbox.hpp"
#include "t2sc/schema_context.hpp"
#include "t2sc/sql_executor.hpp"

namespace t2sc {

struct ExecutionLimits {
  SqlLimits sql;
  SandboxLimits sandbox;
  /// Additional attempts after the first, for every repair loop.
  int max_repairs = 3;
};

/// Everything one method run on one question needs. Non-owning.
struct RunContext {
  const Question& question;
  const DbEntry& entry;
  const Database& db;
  const DbSchemaContext& schema;
  const PromptLibrary& prompts;
  /// Should count calls into `ledger` (see AccountingBackend).
  LlmBackend& llm;
  const CallLedger& ledger;
  /// May be null when no method in use needs code execution.
  Sandbox* sandbox = nullptr;
  RunKey key;
  std::string model_id = "default";
  std::optional<double> temperature;
  ExecutionLimits limits;
  /// Used where a method compares its own samples (self-consistency, hybrid).
  MatchConfig match;
  /// Parent of per-job scratch directories.
  std::filesystem::path scratch_root;

  /// Renders `kind`, sends it as a single user message tagged `tag` and
  /// returns the response text.
  std::string ask(PromptKind kind, CallTag tag, const PromptExtras& extras) const;
};

}  // namespace t2sc
