#include "t2sc/database.hpp"

#include <sqlite3.h>

namespace t2sc {

void Database::Closer::operator()(sqlite3* db) const noexcept { sqlite3_close_v2(db); }

Database Database::open_read_only(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw DbOpenError("database file not found: " + path.string());
  }
  sqlite3* raw = nullptr;
  const int rc = sqlite3_open_v2(path.c_str(), &raw, SQLITE_OPEN_READONLY | SQLITE_OPEN_NOMUTEX, nullptr);
  std::unique_ptr<sqlite3, Closer> db(raw);
  if (rc != SQLITE_OK) {
    const std::string msg = raw ? sqlite3_errmsg(raw) : sqlite3_errstr(rc);
    throw DbOpenError("cannot open " + path.string() + ": " + msg);
  }
  // Touch the schema so a non-database file fails here rather than later.
  char* err = nullptr;
  if (sqlite3_exec(raw, "PRAGMA query_only = 1; SELECT count(*) FROM sqlite_master;", nullptr, nullptr, &err) !=
      SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    throw DbOpenError("cannot open " + path.string() + ": " + msg);
  }
  return Database(std::move(db), path);
}

void Statement::Finalizer::operator()(sqlite3_stmt* stmt) const noexcept { sqlite3_finalize(stmt); }

Statement::Statement(const Database& db, const std::string& sql, std::string* tail) : db_(&db) {
  sqlite3_stmt* raw = nullptr;
  const char* rest = nullptr;
  const int rc = sqlite3_prepare_v2(db.handle(), sql.c_str(), static_cast<int>(sql.size()), &raw, &rest);
  stmt_.reset(raw);
  if (rc != SQLITE_OK) throw Error(sqlite3_errmsg(db.handle()));
  if (tail) *tail = rest ? std::string(rest) : std::string();
}

bool Statement::step() {
  const int rc = sqlite3_step(stmt_.get());
  if (rc == SQLITE_ROW) return true;
  if (rc == SQLITE_DONE) return false;
  throw Error(sqlite3_errmsg(db_->handle()));
}

std::string quote_identifier(const std::string& name) {
  std::string out = "\"";
  for (char c : name) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace t2sc
