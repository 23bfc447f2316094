#include <chrono>

#include <gtest/gtest.h>

#include "t2sc/sql_executor.hpp"
#include "test_support.hpp"

using namespace t2sc;
using namespace t2sc::testing;

namespace {

ResultTable numbers(int n) {
  ResultTable t;
  t.columns = {"i", "label"};
  for (int i = 0; i < n; ++i) t.rows.push_back({std::int64_t{i}, std::string("r") + std::to_string(i)});
  return t;
}

}  // namespace

TEST(SqlExecutor, SelectConstant) {
  TempDir dir;
  build_db(dir / "a.db", "CREATE TABLE t (x INTEGER);");
  const auto db = Database::open_read_only(dir / "a.db");
  const auto out = execute_sql(db, "SELECT 1 AS x");
  ASSERT_TRUE(is_ok(out));
  const auto& t = std::get<ResultTable>(out);
  EXPECT_EQ(t.columns, std::vector<std::string>{"x"});
  ASSERT_EQ(t.row_count(), 1u);
  EXPECT_EQ(t.rows[0][0], Cell{std::int64_t{1}});
  EXPECT_EQ(table_to_answer(t).key(), canonicalize_answer("[(1,)]").key());
}

TEST(SqlExecutor, CellTypes) {
  TempDir dir;
  build_db(dir / "a.db", "CREATE TABLE t (a INTEGER, b REAL, c TEXT, d BLOB); INSERT INTO t VALUES (NULL, 0.1, 'x', x'00ff');");
  const auto out = execute_sql(Database::open_read_only(dir / "a.db"), "SELECT a, b, c, d FROM t");
  const auto& row = std::get<ResultTable>(out).rows.at(0);
  EXPECT_EQ(row[0], Cell{});
  EXPECT_EQ(row[1], Cell{0.1});
  EXPECT_EQ(row[2], Cell{std::string("x")});
  EXPECT_EQ(row[3], Cell{BlobHex{"00ff"}});
  EXPECT_EQ(render_cell(row[1]), "0.1");
  EXPECT_EQ(render_cell(row[0], "\\N"), "\\N");
}

TEST(SqlExecutor, SyntaxErrorVerbatim) {
  TempDir dir;
  build_db(dir / "a.db", "");
  const auto out = execute_sql(Database::open_read_only(dir / "a.db"), "SELEC 1");
  ASSERT_TRUE(std::holds_alternative<SqlError>(out));
  EXPECT_NE(std::get<SqlError>(out).message.find("syntax error"), std::string::npos);
  EXPECT_EQ(describe_failure(out, {}), std::get<SqlError>(out).message);
}

TEST(SqlExecutor, MissingTableError) {
  TempDir dir;
  build_db(dir / "a.db", "");
  const auto out = execute_sql(Database::open_read_only(dir / "a.db"), "SELECT * FROM nowhere");
  ASSERT_TRUE(std::holds_alternative<SqlError>(out));
  EXPECT_NE(std::get<SqlError>(out).message.find("no such table"), std::string::npos);
}

TEST(SqlExecutor, TrailingStatementRejected) {
  TempDir dir;
  build_db(dir / "a.db", "");
  const auto db = Database::open_read_only(dir / "a.db");
  EXPECT_TRUE(std::holds_alternative<SqlError>(execute_sql(db, "SELECT 1; SELECT 2")));
  // Trailing whitespace, semicolons and comments are fine.
  EXPECT_TRUE(is_ok(execute_sql(db, "SELECT 1;  \n")));
  EXPECT_TRUE(is_ok(execute_sql(db, "SELECT 1; -- done")));
}

TEST(SqlExecutor, WritesRejectedAndFileUntouched) {
  TempDir dir;
  build_db(dir / "a.db", "CREATE TABLE t (x INTEGER); INSERT INTO t VALUES (1);");
  const std::string before = file_digest(dir / "a.db");
  const auto db = Database::open_read_only(dir / "a.db");
  for (const char* q : {"DROP TABLE t", "INSERT INTO t VALUES (2)", "DELETE FROM t", "CREATE TABLE u (y)"}) {
    EXPECT_TRUE(std::holds_alternative<SqlError>(execute_sql(db, q))) << q;
  }
  EXPECT_EQ(file_digest(dir / "a.db"), before);
  EXPECT_EQ(std::get<ResultTable>(execute_sql(db, "SELECT count(*) FROM t")).rows[0][0], Cell{std::int64_t{1}});
}

TEST(SqlExecutor, SlowQueryTimesOut) {
  TempDir dir;
  build_db(dir / "big.db",
           "CREATE TABLE t (x INTEGER);"
           "WITH RECURSIVE s(i) AS (SELECT 1 UNION ALL SELECT i + 1 FROM s WHERE i < 100000) "
           "INSERT INTO t SELECT i FROM s;");
  const auto db = Database::open_read_only(dir / "big.db");
  SqlLimits limits;
  limits.timeout = std::chrono::seconds(1);
  const auto start = std::chrono::steady_clock::now();
  const auto out = execute_sql(db, "SELECT count(*) FROM t a, t b WHERE a.x + b.x = 7", limits);
  const auto elapsed = std::chrono::steady_clock::now() - start;
  EXPECT_TRUE(std::holds_alternative<SqlTimeout>(out));
  EXPECT_LT(elapsed, std::chrono::seconds(3));
  EXPECT_NE(describe_failure(out, limits).find("1 seconds"), std::string::npos);
}

TEST(SqlExecutor, CellCap) {
  TempDir dir;
  build_db(dir / "a.db", "");
  SqlLimits limits;
  limits.max_cells = 10;
  const auto db = Database::open_read_only(dir / "a.db");
  const char* q = "WITH RECURSIVE s(i) AS (SELECT 1 UNION ALL SELECT i + 1 FROM s WHERE i < 6) SELECT i, i FROM s";
  EXPECT_TRUE(std::holds_alternative<SqlError>(execute_sql(db, q, limits)));
  limits.max_cells = 12;
  EXPECT_TRUE(is_ok(execute_sql(db, q, limits)));
}

TEST(SqlExecutor, RowOrderPreserved) {
  TempDir dir;
  build_db(dir / "a.db", "CREATE TABLE t (x INTEGER); INSERT INTO t VALUES (3),(1),(2);");
  const auto t = std::get<ResultTable>(execute_sql(Database::open_read_only(dir / "a.db"), "SELECT x FROM t ORDER BY x DESC"));
  ASSERT_EQ(t.row_count(), 3u);
  EXPECT_EQ(t.rows[0][0], Cell{std::int64_t{3}});
  EXPECT_EQ(t.rows[2][0], Cell{std::int64_t{1}});
}

TEST(Dtype, MajorityRule) {
  ResultTable t;
  t.columns = {"a", "b", "c", "d"};
  t.rows = {{std::int64_t{1}, 1.5, std::string("x"), Cell{}},
            {std::int64_t{2}, std::int64_t{2}, std::int64_t{1}, Cell{}},
            {Cell{}, 2.5, std::string("y"), Cell{}}};
  EXPECT_EQ(infer_dtype(t, 0), "int64");
  EXPECT_EQ(infer_dtype(t, 1), "float64");
  EXPECT_EQ(infer_dtype(t, 2), "object");
  EXPECT_EQ(infer_dtype(t, 3), "object");
}

TEST(Shape, EmptyResult) {
  ResultTable t;
  t.columns = {"x"};
  const auto s = shape_of(t);
  EXPECT_EQ(s.row_count, 0u);
  EXPECT_TRUE(s.sample_rows.empty());
  EXPECT_FALSE(s.elided);
}

TEST(Shape, SmallTableShownWhole) {
  const auto s = shape_of(numbers(4));
  EXPECT_EQ(s.row_count, 4u);
  EXPECT_EQ(s.sample_rows, (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_FALSE(s.elided);
  EXPECT_EQ(s.rendered.find("..."), std::string::npos);
  const auto six = shape_of(numbers(6));
  EXPECT_FALSE(six.elided);
}

TEST(Shape, LargeTableHeadAndTail) {
  const auto s = shape_of(numbers(100));
  EXPECT_EQ(s.row_count, 100u);
  EXPECT_EQ(s.sample_rows, (std::vector<std::size_t>{0, 1, 2, 97, 98, 99}));
  EXPECT_TRUE(s.elided);
  EXPECT_NE(s.rendered.find("..."), std::string::npos);
  EXPECT_NE(s.rendered.find("r99"), std::string::npos);
  EXPECT_EQ(s.rendered.find("r50"), std::string::npos);
  EXPECT_EQ(s.dtypes, (std::vector<std::string>{"int64", "object"}));
}

TEST(Shape, RenderShapesListsEveryFrame) {
  const std::string text = render_shapes({numbers(2), numbers(50)});
  EXPECT_NE(text.find("listOfDFs[0]"), std::string::npos);
  EXPECT_NE(text.find("listOfDFs[1]"), std::string::npos);
  EXPECT_NE(text.find("50"), std::string::npos);
}

TEST(Grid, RightAligned) {
  const std::string g = render_grid({"a", "long"}, {{"1", "x"}, {"100", "y"}});
  EXPECT_NE(g.find("  1"), std::string::npos);
  EXPECT_NE(g.find("100"), std::string::npos);
}
