#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "t2sc/answer.hpp"
#include "t2sc/database.hpp"
#include "t2sc/table.hpp"

namespace t2sc {

struct RunContext;

struct SqlError {
  std::string message;
  friend bool operator==(const SqlError&, const SqlError&) = default;
};

struct SqlTimeout {
  friend bool operator==(const SqlTimeout&, const SqlTimeout&) = default;
};

using SqlOutcome = std::variant<ResultTable, SqlError, SqlTimeout>;

struct SqlLimits {
  std::chrono::milliseconds timeout{120'000};
  /// Results larger than this many cells are rejected as an error.
  std::size_t max_cells = 2'000'000;
};

/// Runs the first statement of `query`. Engine errors come back verbatim;
/// trailing statements are rejected; a statement still running at the
/// deadline is interrupted and reported as SqlTimeout.
SqlOutcome execute_sql(const Database& db, std::string_view query, const SqlLimits& limits = {});

inline bool is_ok(const SqlOutcome& o) { return std::holds_alternative<ResultTable>(o); }

/// Error text handed to the repair prompt.
std::string describe_failure(const SqlOutcome& o, const SqlLimits& limits);

struct SqlAttempt {
  /// Empty when the response had no sql block.
  std::string query;
  SqlOutcome outcome;
};

struct SqlExecution {
  std::string step_text;
  std::vector<SqlAttempt> attempts;
  std::optional<ResultTable> final;

  bool ok() const noexcept { return final.has_value(); }
};

/// Text2Sql prompt, then up to ctx.limits.max_repairs repair prompts until a
/// query succeeds. `decomposed` selects step mode (the step replaces the
/// question in the prompt). Never throws for SQL failures; backend errors
/// propagate.
SqlExecution run_sql_step_with_repair(const RunContext& ctx, std::string_view step_text, bool decomposed);

/// Each row becomes a tuple; reals use their shortest round-trip form.
AnswerSet table_to_answer(const ResultTable& t);

/// Column type label in dataframe terms: int64, float64 or object. Decided
/// by the majority of non-null cells; ties and all-null columns are object.
std::string infer_dtype(const ResultTable& t, std::size_t column);

struct TableShape {
  std::vector<std::string> columns;
  std::vector<std::string> dtypes;
  std::size_t row_count = 0;
  /// Original row positions of the sampled rows.
  std::vector<std::size_t> sample_rows;
  /// True when the middle rows were elided.
  bool elided = false;
  /// Rendered grid with a dataframe-style integer index.
  std::string rendered;
};

/// Head and tail samples of `n_sample` rows when row_count > 2 * n_sample,
/// otherwise every row.
TableShape shape_of(const ResultTable& t, std::size_t n_sample = 3, std::string_view null_literal = "None");

/// Prompt block describing listOfDFs[0..n).
std::string render_shapes(const std::vector<ResultTable>& tables, std::size_t n_sample = 3,
                          std::string_view null_literal = "None");

}  // namespace t2sc
