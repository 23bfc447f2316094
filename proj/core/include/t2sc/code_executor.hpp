#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "t2sc/answer.hpp"
#include "t2sc/error.hpp"
#include "t2sc/sandbox.hpp"
#include "t2sc/table.hpp"

namespace t2sc {

struct RunContext;

class IoError : public Error {
 public:
  using Error::Error;
};

/// Table payload: {"columns": [{"name", "dtype"}], "rows": [[cell, ...]]}.
/// Null is JSON null, integers and reals are JSON numbers, text is a string
/// and a blob is {"blob": hex}.
nlohmann::json table_to_json(const ResultTable& t);
/// Throws Error when the document is not a table payload.
ResultTable table_from_json(const nlohmann::json& doc);
/// Throws IoError.
void serialize_table(const ResultTable& t, const std::filesystem::path& path);
ResultTable read_table(const std::filesystem::path& path);

struct CodeAttempt {
  /// Empty when the response had no python block.
  std::string code;
  /// Unset when nothing was submitted to the sandbox.
  std::optional<SandboxResult> result;
  /// Error text fed to the next repair prompt; empty on success.
  std::string error;
};

struct CodeExecution {
  std::vector<CodeAttempt> attempts;
  std::optional<AnswerSet> final;

  bool ok() const noexcept { return final.has_value(); }
  std::size_t sandbox_runs() const;
};

/// Error text for a failed sandbox run: exception type and message plus the
/// last 20 traceback lines.
std::string repair_error_text(const SandboxResult& r);

/// Error text for output that is not a list of tuples.
std::string format_reminder(std::string_view reason);

/// Multi mode when `tables` is set (one payload per SQL step, in order),
/// Single mode otherwise. `decomposition` feeds the multi prompt.
CodeExecution run_code_with_repair(const RunContext& ctx, const std::vector<ResultTable>* tables,
                                   std::string_view decomposition = {});

}  // namespace t2sc
