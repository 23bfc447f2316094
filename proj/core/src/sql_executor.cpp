#include "t2sc/sql_executor.hpp"

#include <sqlite3.h>

#include <cmath>
#include <memory>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "sqlite_cells.hpp"
#include "t2sc/prompting.hpp"
#include "t2sc/run_context.hpp"

namespace t2sc {

namespace {

struct Deadline {
  std::chrono::steady_clock::time_point at;
  bool expired = false;
};

int check_deadline(void* arg) {
  auto* d = static_cast<Deadline*>(arg);
  if (std::chrono::steady_clock::now() >= d->at) {
    d->expired = true;
    return 1;
  }
  return 0;
}

class ProgressGuard {
 public:
  ProgressGuard(sqlite3* db, Deadline* d) : db_(db) { sqlite3_progress_handler(db_, 1000, &check_deadline, d); }
  ~ProgressGuard() { sqlite3_progress_handler(db_, 0, nullptr, nullptr); }
  ProgressGuard(const ProgressGuard&) = delete;
  ProgressGuard& operator=(const ProgressGuard&) = delete;

 private:
  sqlite3* db_;
};

struct StmtDeleter {
  void operator()(sqlite3_stmt* s) const noexcept { sqlite3_finalize(s); }
};
using StmtPtr = std::unique_ptr<sqlite3_stmt, StmtDeleter>;

/// True when `tail` holds another statement (or text that fails to parse).
bool has_further_statement(sqlite3* db, const char* tail, const char* end) {
  while (tail && tail < end) {
    sqlite3_stmt* raw = nullptr;
    const char* next = nullptr;
    const int rc = sqlite3_prepare_v2(db, tail, static_cast<int>(end - tail), &raw, &next);
    StmtPtr stmt(raw);
    if (rc != SQLITE_OK) return true;
    if (stmt) return true;
    if (next == tail) break;
    tail = next;
  }
  return false;
}

}  // namespace

SqlOutcome execute_sql(const Database& db, std::string_view query, const SqlLimits& limits) {
  sqlite3* handle = db.handle();
  Deadline deadline{std::chrono::steady_clock::now() + limits.timeout};
  ProgressGuard guard(handle, &deadline);

  const std::string sql(query);
  const char* begin = sql.c_str();
  const char* end = begin + sql.size();
  sqlite3_stmt* raw = nullptr;
  const char* tail = nullptr;
  int rc = sqlite3_prepare_v2(handle, begin, static_cast<int>(sql.size()), &raw, &tail);
  StmtPtr stmt(raw);
  if (rc != SQLITE_OK) {
    if (deadline.expired) return SqlTimeout{};
    return SqlError{sqlite3_errmsg(handle)};
  }
  if (!stmt) return SqlError{"no SQL statement found"};
  if (has_further_statement(handle, tail, end)) {
    return SqlError{"only one SQL statement can be executed; remove everything after the first statement"};
  }

  ResultTable table;
  table.columns = detail::column_names(stmt.get());
  const std::size_t width = table.columns.size();
  std::size_t cells = 0;
  while (true) {
    rc = sqlite3_step(stmt.get());
    if (rc == SQLITE_DONE) break;
    if (rc != SQLITE_ROW) {
      if (rc == SQLITE_INTERRUPT && deadline.expired) return SqlTimeout{};
      return SqlError{sqlite3_errmsg(handle)};
    }
    cells += width;
    if (cells > limits.max_cells) {
      return SqlError{fmt::format("result too large (more than {} cells); add filtering/aggregation",
                                  limits.max_cells)};
    }
    std::vector<Cell> row;
    row.reserve(width);
    for (std::size_t c = 0; c < width; ++c) row.push_back(detail::read_cell(stmt.get(), static_cast<int>(c)));
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string describe_failure(const SqlOutcome& o, const SqlLimits& limits) {
  if (const auto* e = std::get_if<SqlError>(&o)) return e->message;
  if (std::holds_alternative<SqlTimeout>(o)) {
    return fmt::format("the query did not finish within {} seconds; write a more efficient query",
                       std::chrono::duration<double>(limits.timeout).count());
  }
  return {};
}

SqlExecution run_sql_step_with_repair(const RunContext& ctx, std::string_view step_text, bool decomposed) {
  SqlExecution exec;
  exec.step_text = std::string(step_text);
  const int budget = 1 + std::max(0, ctx.limits.max_repairs);
  std::string previous;
  std::string error;
  for (int attempt = 0; attempt < budget; ++attempt) {
    PromptExtras extras;
    extras.format_rules = ctx.entry.format_rules;
    std::string response;
    if (attempt == 0) {
      if (decomposed) extras.step = exec.step_text;
      response = ctx.ask(PromptKind::Text2Sql, CallTag::Text2Sql, extras);
    } else {
      extras.step = exec.step_text;
      extras.artifact = previous;
      extras.error = error;
      response = ctx.ask(PromptKind::RepairSql, CallTag::RepairSql, extras);
    }

    SqlAttempt a;
    try {
      a.query = extract_fenced(response, "sql");
      a.outcome = execute_sql(ctx.db, a.query, ctx.limits.sql);
    } catch (const NoBlockFound& e) {
      a.outcome = SqlError{std::string(e.what()) + "; wrap the query in a ```sql block"};
    }
    const bool ok = is_ok(a.outcome);
    if (ok) {
      exec.final = std::get<ResultTable>(a.outcome);
    } else {
      previous = a.query.empty() ? response : a.query;
      error = describe_failure(a.outcome, ctx.limits.sql);
    }
    exec.attempts.push_back(std::move(a));
    if (ok) break;
  }
  return exec;
}

AnswerSet table_to_answer(const ResultTable& t) {
  std::vector<AnswerTuple> tuples;
  tuples.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    if (row.empty()) continue;
    std::vector<Constituent> values;
    values.reserve(row.size());
    for (const auto& cell : row) {
      if (std::holds_alternative<std::monostate>(cell)) {
        values.push_back(Constituent::null());
      } else if (const auto* i = std::get_if<std::int64_t>(&cell)) {
        values.push_back(Constituent::number(Decimal::from_int(*i)));
      } else if (const auto* d = std::get_if<double>(&cell)) {
        if (auto dec = Decimal::from_double(*d)) {
          values.push_back(Constituent::number(*dec));
        } else {
          values.push_back(Constituent::text(render_cell(cell)));
        }
      } else if (const auto* s = std::get_if<std::string>(&cell)) {
        values.push_back(Constituent::text(*s));
      } else {
        values.push_back(Constituent::text(std::get<BlobHex>(cell).hex));
      }
    }
    tuples.emplace_back(std::move(values));
  }
  return AnswerSet(std::move(tuples));
}

std::string infer_dtype(const ResultTable& t, std::size_t column) {
  std::size_t ints = 0, reals = 0, texts = 0;
  for (const auto& row : t.rows) {
    if (column >= row.size()) continue;
    const Cell& c = row[column];
    if (std::holds_alternative<std::int64_t>(c)) {
      ++ints;
    } else if (std::holds_alternative<double>(c)) {
      ++reals;
    } else if (!std::holds_alternative<std::monostate>(c)) {
      ++texts;
    }
  }
  if (ints > reals && ints > texts) return "int64";
  if (reals > ints && reals > texts) return "float64";
  return "object";
}

TableShape shape_of(const ResultTable& t, std::size_t n_sample, std::string_view null_literal) {
  TableShape shape;
  shape.columns = t.columns;
  shape.row_count = t.row_count();
  for (std::size_t c = 0; c < t.columns.size(); ++c) shape.dtypes.push_back(infer_dtype(t, c));

  if (shape.row_count == 0) {
    shape.rendered = fmt::format("Empty DataFrame\nColumns: [{}]\nIndex: []\n", fmt::join(t.columns, ", "));
    return shape;
  }

  if (shape.row_count > 2 * n_sample) {
    shape.elided = true;
    for (std::size_t i = 0; i < n_sample; ++i) shape.sample_rows.push_back(i);
    for (std::size_t i = shape.row_count - n_sample; i < shape.row_count; ++i) shape.sample_rows.push_back(i);
  } else {
    for (std::size_t i = 0; i < shape.row_count; ++i) shape.sample_rows.push_back(i);
  }

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> index;
  for (std::size_t k = 0; k < shape.sample_rows.size(); ++k) {
    if (shape.elided && k == n_sample) {
      rows.emplace_back(t.columns.size(), "...");
      index.emplace_back("...");
    }
    const auto r = shape.sample_rows[k];
    std::vector<std::string> cells;
    for (const auto& cell : t.rows[r]) cells.push_back(render_cell(cell, null_literal));
    rows.push_back(std::move(cells));
    index.push_back(std::to_string(r));
  }
  shape.rendered = render_grid(t.columns, rows, index);
  return shape;
}

std::string render_shapes(const std::vector<ResultTable>& tables, std::size_t n_sample,
                          std::string_view null_literal) {
  std::string out;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    const TableShape s = shape_of(tables[i], n_sample, null_literal);
    std::vector<std::string> cols;
    for (std::size_t c = 0; c < s.columns.size(); ++c) cols.push_back(s.columns[c] + " (" + s.dtypes[c] + ")");
    if (i > 0) out += "\n";
    out += fmt::format("listOfDFs[{}]: {} rows x {} columns\ncolumns: {}\n{}", i, s.row_count, s.columns.size(),
                       fmt::join(cols, ", "), s.rendered);
  }
  return out;
}

}  // namespace t2sc
