#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace t2sc {

/// Blob cells are carried as lowercase hex.
struct BlobHex {
  std::string hex;
  friend bool operator==(const BlobHex&, const BlobHex&) = default;
};

/// null | integer | real | text | blob
using Cell = std::variant<std::monostate, std::int64_t, double, std::string, BlobHex>;

/// Materialized query result. Every row has columns.size() cells; row order
/// is the order the engine produced.
struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  std::size_t row_count() const noexcept { return rows.size(); }
  friend bool operator==(const ResultTable&, const ResultTable&) = default;
};

/// Text form of a cell as shown in prompts. Reals use the shortest
/// round-trip rendering.
std::string render_cell(const Cell& cell, std::string_view null_literal = "None");

/// Right-aligned, space-separated grid in the style of a dataframe printout.
/// When `index` is non-empty it supplies the leading row labels and the
/// header gets a blank index column.
std::string render_grid(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows,
                        const std::vector<std::string>& index = {});

}  // namespace t2sc
