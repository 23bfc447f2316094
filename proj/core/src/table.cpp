#include "t2sc/table.hpp"

#include <algorithm>
#include <charconv>

namespace t2sc {

std::string render_cell(const Cell& cell, std::string_view null_literal) {
  struct Visitor {
    std::string_view null_literal;
    std::string operator()(std::monostate) const { return std::string(null_literal); }
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(double v) const {
      char buf[64];
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      return std::string(buf, end);
    }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(const BlobHex& b) const { return "x'" + b.hex + "'"; }
  };
  return std::visit(Visitor{null_literal}, cell);
}

std::string render_grid(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows,
                        const std::vector<std::string>& index) {
  const bool with_index = !index.empty();
  std::size_t index_width = 0;
  for (const auto& label : index) index_width = std::max(index_width, label.size());

  std::vector<std::size_t> widths(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    widths[c] = header[c].size();
    for (const auto& row : rows) {
      if (c < row.size()) widths[c] = std::max(widths[c], row[c].size());
    }
  }

  auto pad_left = [](std::string& out, const std::string& s, std::size_t width) {
    if (s.size() < width) out.append(width - s.size(), ' ');
    out += s;
  };

  std::string out;
  if (with_index) out.append(index_width, ' ');
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c > 0 || with_index) out.push_back(' ');
    pad_left(out, header[c], widths[c]);
  }
  out.push_back('\n');
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (with_index) {
      std::string label = r < index.size() ? index[r] : std::string();
      out += label;
      out.append(index_width - label.size(), ' ');
    }
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c > 0 || with_index) out.push_back(' ');
      pad_left(out, c < rows[r].size() ? rows[r][c] : std::string(), widths[c]);
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace t2sc
