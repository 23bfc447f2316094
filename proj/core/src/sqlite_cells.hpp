#pragma once

#include <sqlite3.h>

#include "t2sc/table.hpp"

namespace t2sc::detail {

inline Cell read_cell(sqlite3_stmt* stmt, int col) {
  switch (sqlite3_column_type(stmt, col)) {
    case SQLITE_INTEGER:
      return static_cast<std::int64_t>(sqlite3_column_int64(stmt, col));
    case SQLITE_FLOAT:
      return sqlite3_column_double(stmt, col);
    case SQLITE_TEXT: {
      const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt, col));
      return std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt, col)));
    }
    case SQLITE_BLOB: {
      static constexpr char kHex[] = "0123456789abcdef";
      const auto* p = static_cast<const unsigned char*>(sqlite3_column_blob(stmt, col));
      const int n = sqlite3_column_bytes(stmt, col);
      BlobHex blob;
      blob.hex.reserve(static_cast<std::size_t>(n) * 2);
      for (int i = 0; i < n; ++i) {
        blob.hex.push_back(kHex[p[i] >> 4]);
        blob.hex.push_back(kHex[p[i] & 0xF]);
      }
      return blob;
    }
    default:
      return std::monostate{};
  }
}

inline std::vector<std::string> column_names(sqlite3_stmt* stmt) {
  std::vector<std::string> names;
  const int n = sqlite3_column_count(stmt);
  for (int i = 0; i < n; ++i) {
    const char* name = sqlite3_column_name(stmt, i);
    names.emplace_back(name ? name : "");
  }
  return names;
}

}  // namespace t2sc::detail
