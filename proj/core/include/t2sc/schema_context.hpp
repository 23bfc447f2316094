#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "t2sc/database.hpp"
#include "t2sc/dataset.hpp"
#include "t2sc/error.hpp"
#include "t2sc/table.hpp"

namespace t2sc {

class IntrospectionError : public Error {
 public:
  IntrospectionError(const std::string& table, const std::string& reason)
      : Error("introspection of table '" + table + "' failed: " + reason), table_(table) {}
  const std::string& table() const noexcept { return table_; }

 private:
  std::string table_;
};

struct ColumnInfo {
  std::string name;
  std::string declared_type;
  std::string description;
  bool primary_key = false;
};

struct ForeignKey {
  std::string column;
  std::string ref_table;
  std::string ref_column;
};

struct TableContext {
  std::string name;
  std::string create_sql;
  std::vector<ColumnInfo> columns;
  std::vector<ForeignKey> foreign_keys;
  /// At most k rows, in storage order.
  ResultTable sample;
};

struct CategoricalValues {
  std::string table;
  std::string column;
  std::string description;
  std::vector<std::string> values;
  /// True when the distinct count exceeded the cap and values were omitted.
  bool skipped = false;
};

struct DbSchemaContext {
  std::string db_id;
  std::vector<TableContext> tables;
  std::vector<CategoricalValues> categorical;
  std::string notes;
  std::string null_literal = "None";
  std::size_t k_samples = 3;
};

struct IntrospectOptions {
  std::size_t k_samples = 3;
  std::size_t categorical_cap = 300;
};

/// Reads every user table (catalog order), its DDL, keys and first k rows.
/// Categorical enumerations and column descriptions come from `entry`.
DbSchemaContext introspect_schema(const Database& db, const DbEntry& entry, const IntrospectOptions& opts = {});
DbSchemaContext introspect_schema(const Database& db, const IntrospectOptions& opts = {});

/// Deterministic prompt block: per table a "-- Table:" header, DDL, keys,
/// column glosses and the sample rows; then categorical value lists; then
/// the registry notes verbatim.
std::string render_context(const DbSchemaContext& ctx);

}  // namespace t2sc
