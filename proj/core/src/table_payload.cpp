#include <fstream>

#include <nlohmann/json.hpp>

#include "t2sc/code_executor.hpp"
#include "t2sc/sql_executor.hpp"

namespace t2sc {

nlohmann::json table_to_json(const ResultTable& t) {
  nlohmann::json columns = nlohmann::json::array();
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    columns.push_back({{"name", t.columns[c]}, {"dtype", infer_dtype(t, c)}});
  }
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : t.rows) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& cell : row) {
      std::visit(
          [&](const auto& v) {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, std::monostate>) {
              r.push_back(nullptr);
            } else if constexpr (std::is_same_v<V, BlobHex>) {
              r.push_back({{"blob", v.hex}});
            } else {
              r.push_back(v);
            }
          },
          cell);
    }
    rows.push_back(std::move(r));
  }
  return {{"columns", std::move(columns)}, {"rows", std::move(rows)}};
}

ResultTable table_from_json(const nlohmann::json& doc) {
  ResultTable t;
  try {
    for (const auto& c : doc.at("columns")) t.columns.push_back(c.at("name").get<std::string>());
    for (const auto& r : doc.at("rows")) {
      if (!r.is_array() || r.size() != t.columns.size()) throw Error("table payload row width mismatch");
      std::vector<Cell> row;
      for (const auto& v : r) {
        if (v.is_null()) {
          row.emplace_back(std::monostate{});
        } else if (v.is_number_integer()) {
          row.emplace_back(v.get<std::int64_t>());
        } else if (v.is_number_float()) {
          row.emplace_back(v.get<double>());
        } else if (v.is_string()) {
          row.emplace_back(v.get<std::string>());
        } else if (v.is_object() && v.contains("blob")) {
          row.emplace_back(BlobHex{v.at("blob").get<std::string>()});
        } else {
          throw Error("unsupported cell in table payload: " + v.dump());
        }
      }
      t.rows.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed table payload: ") + e.what());
  }
  return t;
}

void serialize_table(const ResultTable& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << table_to_json(t).dump();
  if (!out) throw IoError("write failed for " + path.string());
}

ResultTable read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return table_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace t2sc
