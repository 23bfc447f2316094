#include <filesystem>
#include <string>
#include <unistd.h>

#include <benchmark/benchmark.h>
#include <sqlite3.h>

#include "t2sc/database.hpp"
#include "t2sc/schema_context.hpp"
#include "t2sc/sql_executor.hpp"

namespace {

// Eight tables of 10k rows each, built once per process.
const std::filesystem::path& bench_db() {
  static const std::filesystem::path path = [] {
    auto p = std::filesystem::temp_directory_path() / ("t2sc-bench-" + std::to_string(::getpid()) + ".db");
    std::filesystem::remove(p);
    sqlite3* db = nullptr;
    sqlite3_open(p.c_str(), &db);
    std::string sql = "BEGIN;";
    for (int t = 0; t < 8; ++t) {
      const std::string name = "t" + std::to_string(t);
      sql += "CREATE TABLE " + name + " (id INTEGER PRIMARY KEY, grp TEXT, amount REAL, note TEXT);";
      sql += "WITH RECURSIVE s(i) AS (SELECT 1 UNION ALL SELECT i + 1 FROM s WHERE i < 10000) INSERT INTO " + name +
             " SELECT i, 'g' || (i % 12), i * 0.25, 'row ' || i FROM s;";
    }
    sql += "COMMIT;";
    sqlite3_exec(db, sql.c_str(), nullptr, nullptr, nullptr);
    sqlite3_close(db);
    std::atexit([] { std::filesystem::remove(bench_db()); });
    return p;
  }();
  return path;
}

void BM_IntrospectAndRender(benchmark::State& state) {
  const auto db = t2sc::Database::open_read_only(bench_db());
  t2sc::DbEntry entry;
  entry.db_id = "bench";
  for (int t = 0; t < 8; ++t) entry.categorical.push_back({"t" + std::to_string(t), "grp", ""});
  for (auto _ : state) {
    const auto ctx = t2sc::introspect_schema(db, entry);
    benchmark::DoNotOptimize(t2sc::render_context(ctx));
  }
}
BENCHMARK(BM_IntrospectAndRender)->Unit(benchmark::kMillisecond);

void BM_ExecuteGroupBy(benchmark::State& state) {
  const auto db = t2sc::Database::open_read_only(bench_db());
  for (auto _ : state) {
    benchmark::DoNotOptimize(t2sc::execute_sql(db, "SELECT grp, sum(amount), count(*) FROM t0 GROUP BY grp"));
  }
}
BENCHMARK(BM_ExecuteGroupBy)->Unit(benchmark::kMillisecond);

void BM_FetchAndShape(benchmark::State& state) {
  const auto db = t2sc::Database::open_read_only(bench_db());
  for (auto _ : state) {
    const auto out = t2sc::execute_sql(db, "SELECT * FROM t1");
    benchmark::DoNotOptimize(t2sc::shape_of(std::get<t2sc::ResultTable>(out)));
  }
}
BENCHMARK(BM_FetchAndShape)->Unit(benchmark::kMillisecond);

}  // namespace
