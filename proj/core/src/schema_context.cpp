#include "t2sc/schema_context.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <sqlite3.h>

#include "sqlite_cells.hpp"

namespace t2sc {

namespace {

std::string column_text(sqlite3_stmt* stmt, int col) {
  const auto* p = sqlite3_column_text(stmt, col);
  return p ? reinterpret_cast<const char*>(p) : std::string();
}

void load_columns(const Database& db, TableContext& table) {
  Statement info(db, "PRAGMA table_info(" + quote_identifier(table.name) + ")");
  while (info.step()) {
    ColumnInfo col;
    col.name = column_text(info.get(), 1);
    col.declared_type = column_text(info.get(), 2);
    col.primary_key = sqlite3_column_int(info.get(), 5) > 0;
    table.columns.push_back(std::move(col));
  }
  Statement fks(db, "PRAGMA foreign_key_list(" + quote_identifier(table.name) + ")");
  while (fks.step()) {
    table.foreign_keys.push_back({column_text(fks.get(), 3), column_text(fks.get(), 2), column_text(fks.get(), 4)});
  }
}

void load_sample(const Database& db, TableContext& table, std::size_t k) {
  Statement rows(db, "SELECT * FROM " + quote_identifier(table.name) + " LIMIT " + std::to_string(k));
  table.sample.columns = detail::column_names(rows.get());
  while (rows.step()) {
    std::vector<Cell> row;
    row.reserve(table.sample.columns.size());
    for (int c = 0; c < static_cast<int>(table.sample.columns.size()); ++c) row.push_back(detail::read_cell(rows.get(), c));
    table.sample.rows.push_back(std::move(row));
  }
}

CategoricalValues enumerate_values(const Database& db, const CategoricalColumn& spec, std::size_t cap,
                                   std::string_view null_literal) {
  CategoricalValues out{spec.table, spec.column, spec.description, {}, false};
  const std::string sql = fmt::format("SELECT DISTINCT {0} FROM {1} WHERE {0} IS NOT NULL ORDER BY 1 LIMIT {2}",
                                      quote_identifier(spec.column), quote_identifier(spec.table), cap + 1);
  Statement stmt(db, sql);
  while (stmt.step()) out.values.push_back(render_cell(detail::read_cell(stmt.get(), 0), null_literal));
  if (out.values.size() > cap) {
    out.values.clear();
    out.skipped = true;
  }
  return out;
}

}  // namespace

DbSchemaContext introspect_schema(const Database& db, const IntrospectOptions& opts) {
  DbEntry bare;
  bare.db_id = db.path().stem().string();
  return introspect_schema(db, bare, opts);
}

DbSchemaContext introspect_schema(const Database& db, const DbEntry& entry, const IntrospectOptions& opts) {
  DbSchemaContext ctx;
  ctx.db_id = entry.db_id;
  ctx.notes = entry.notes;
  ctx.null_literal = entry.null_literal;
  ctx.k_samples = opts.k_samples;

  {
    Statement catalog(db,
                      "SELECT name, sql FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite\\_%' "
                      "ESCAPE '\\' ORDER BY rowid");
    while (catalog.step()) {
      TableContext table;
      table.name = column_text(catalog.get(), 0);
      table.create_sql = column_text(catalog.get(), 1);
      ctx.tables.push_back(std::move(table));
    }
  }

  for (auto& table : ctx.tables) {
    try {
      load_columns(db, table);
      load_sample(db, table, opts.k_samples);
    } catch (const Error& e) {
      throw IntrospectionError(table.name, e.what());
    }
    if (auto it = entry.column_descriptions.find(table.name); it != entry.column_descriptions.end()) {
      for (auto& col : table.columns) {
        if (auto d = it->second.find(col.name); d != it->second.end()) col.description = d->second;
      }
    }
  }

  for (const auto& spec : entry.categorical) {
    auto table = std::find_if(ctx.tables.begin(), ctx.tables.end(), [&](const auto& t) { return t.name == spec.table; });
    if (table == ctx.tables.end()) throw IntrospectionError(spec.table, "categorical column refers to a missing table");
    const bool has_column = std::any_of(table->columns.begin(), table->columns.end(),
                                        [&](const auto& c) { return c.name == spec.column; });
    if (!has_column) throw IntrospectionError(spec.table, "no column '" + spec.column + "'");
    try {
      ctx.categorical.push_back(enumerate_values(db, spec, opts.categorical_cap, ctx.null_literal));
    } catch (const Error& e) {
      throw IntrospectionError(spec.table, e.what());
    }
  }
  return ctx;
}

std::string render_context(const DbSchemaContext& ctx) {
  std::string out;
  for (const auto& table : ctx.tables) {
    out += fmt::format("-- Table: {}\n", table.name);
    out += table.create_sql;
    out.push_back('\n');

    std::vector<std::string> pk;
    for (const auto& c : table.columns) {
      if (c.primary_key) pk.push_back(c.name);
    }
    if (!pk.empty()) out += fmt::format("-- primary key: ({})\n", fmt::join(pk, ", "));
    for (const auto& fk : table.foreign_keys) {
      out += fmt::format("-- foreign key: {} -> {}({})\n", fk.column, fk.ref_table, fk.ref_column);
    }

    const bool any_description =
        std::any_of(table.columns.begin(), table.columns.end(), [](const auto& c) { return !c.description.empty(); });
    if (any_description) {
      out += "-- column descriptions:\n";
      for (const auto& c : table.columns) {
        if (!c.description.empty()) out += fmt::format("--   {} ({}): {}\n", c.name, c.declared_type, c.description);
      }
    }

    std::vector<std::vector<std::string>> rows;
    for (const auto& row : table.sample.rows) {
      std::vector<std::string> rendered;
      for (const auto& cell : row) rendered.push_back(render_cell(cell, ctx.null_literal));
      rows.push_back(std::move(rendered));
    }
    out += "/*\n";
    out += fmt::format("{} example rows:\n", rows.size());
    out += fmt::format("SELECT * FROM {} LIMIT {};\n", table.name, ctx.k_samples);
    out += render_grid(table.sample.columns, rows);
    out += "*/\n\n";
  }

  if (!ctx.categorical.empty()) {
    out += "Possible values of categorical columns:\n";
    for (const auto& cat : ctx.categorical) {
      const std::string label = cat.description.empty() ? fmt::format("{}.{}", cat.table, cat.column)
                                                         : fmt::format("{}.{} ({})", cat.table, cat.column, cat.description);
      if (cat.skipped) {
        out += fmt::format("- {}: too many distinct values to list\n", label);
      } else {
        out += fmt::format("- {}: {{{}}}\n", label, fmt::join(cat.values, ", "));
      }
    }
    out.push_back('\n');
  }

  out += ctx.notes;
  while (!out.empty() && (out.back() == '\n' || out.back() == ' ' || out.back() == '\r')) out.pop_back();
  return out;
}

}  // namespace t2sc
