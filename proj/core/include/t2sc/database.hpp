#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "t2sc/error.hpp"

struct sqlite3;
struct sqlite3_stmt;

namespace t2sc {

class DbOpenError : public Error {
 public:
  using Error::Error;
};

/// Owning read-only SQLite connection. Writes are rejected by the engine.
class Database {
 public:
  /// Throws DbOpenError when the file is missing or not a database.
  static Database open_read_only(const std::filesystem::path& path);

  sqlite3* handle() const noexcept { return db_.get(); }
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  struct Closer {
    void operator()(sqlite3* db) const noexcept;
  };
  Database(std::unique_ptr<sqlite3, Closer> db, std::filesystem::path path)
      : db_(std::move(db)), path_(std::move(path)) {}

  std::unique_ptr<sqlite3, Closer> db_;
  std::filesystem::path path_;
};

/// Prepared statement; finalized on destruction.
class Statement {
 public:
  /// Compiles the first statement of `sql`; `tail` receives the unparsed rest.
  /// Throws Error with the engine message on failure.
  Statement(const Database& db, const std::string& sql, std::string* tail = nullptr);

  sqlite3_stmt* get() const noexcept { return stmt_.get(); }
  /// Returns true while rows are available; throws Error on engine failure.
  bool step();

 private:
  struct Finalizer {
    void operator()(sqlite3_stmt* stmt) const noexcept;
  };
  const Database* db_;
  std::unique_ptr<sqlite3_stmt, Finalizer> stmt_;
};

/// Double-quotes an identifier for safe interpolation into SQL.
std::string quote_identifier(const std::string& name);

}  // namespace t2sc
