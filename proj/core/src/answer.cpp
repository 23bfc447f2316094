#include "t2sc/answer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "t2sc/error.hpp"

namespace t2sc {

namespace {

// Exponents beyond this are rejected instead of materializing huge strings.
constexpr std::int32_t kMaxExponent = 4096;

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\f\v");
  return s.substr(first, last - first + 1);
}

}  // namespace

// ---------------------------------------------------------------- Decimal

Decimal::Decimal(bool negative, std::string digits, std::int32_t exponent) {
  const auto nz = digits.find_first_not_of('0');
  if (nz == std::string::npos) {
    return;  // zero, default members
  }
  digits.erase(0, nz);
  while (digits.size() > 1 && digits.back() == '0') {
    digits.pop_back();
    ++exponent;
  }
  negative_ = negative;
  digits_ = std::move(digits);
  exponent_ = exponent;

  std::string out;
  if (negative_) out.push_back('-');
  if (exponent_ >= 0) {
    out += digits_;
    out.append(static_cast<std::size_t>(exponent_), '0');
  } else {
    const auto frac = static_cast<std::size_t>(-exponent_);
    if (digits_.size() > frac) {
      out += digits_.substr(0, digits_.size() - frac);
      out.push_back('.');
      out += digits_.substr(digits_.size() - frac);
    } else {
      out += "0.";
      out.append(frac - digits_.size(), '0');
      out += digits_;
    }
  }
  canonical_ = std::move(out);
  approx_ = std::strtod(canonical_.c_str(), nullptr);
}

std::optional<Decimal> Decimal::parse(std::string_view text) {
  std::size_t i = 0;
  bool negative = false;
  if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
    negative = text[i] == '-';
    ++i;
  }
  std::string digits;
  std::int64_t exponent = 0;
  bool any_digit = false;
  while (i < text.size() && is_digit(text[i])) {
    digits.push_back(text[i++]);
    any_digit = true;
  }
  if (i < text.size() && text[i] == '.') {
    ++i;
    while (i < text.size() && is_digit(text[i])) {
      digits.push_back(text[i++]);
      --exponent;
      any_digit = true;
    }
  }
  if (!any_digit) return std::nullopt;
  if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
    ++i;
    bool exp_negative = false;
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
      exp_negative = text[i] == '-';
      ++i;
    }
    if (i >= text.size() || !is_digit(text[i])) return std::nullopt;
    std::int64_t e = 0;
    while (i < text.size() && is_digit(text[i])) {
      e = e * 10 + (text[i++] - '0');
      if (e > 1'000'000) return std::nullopt;
    }
    exponent += exp_negative ? -e : e;
  }
  if (i != text.size()) return std::nullopt;
  // Bound the rendered size; leading zeros in the significand do not count.
  const auto nz = digits.find_first_not_of('0');
  if (nz != std::string::npos) {
    const std::int64_t magnitude = static_cast<std::int64_t>(digits.size() - nz) + exponent;
    if (exponent > kMaxExponent || magnitude < -kMaxExponent || magnitude > kMaxExponent) {
      return std::nullopt;
    }
  } else {
    exponent = 0;
  }
  return Decimal(negative, std::move(digits), static_cast<std::int32_t>(exponent));
}

Decimal Decimal::from_int(std::int64_t value) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return *parse(std::string_view(buf, static_cast<std::size_t>(end - buf)));
}

std::optional<Decimal> Decimal::from_double(double value) {
  if (!std::isfinite(value)) return std::nullopt;
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) return std::nullopt;
  return parse(std::string_view(buf, static_cast<std::size_t>(end - buf)));
}


std::strong_ordering operator<=>(const Decimal& a, const Decimal& b) noexcept {
  if (a.is_zero() || b.is_zero()) {
    const int sa = a.is_zero() ? 0 : (a.negative_ ? -1 : 1);
    const int sb = b.is_zero() ? 0 : (b.negative_ ? -1 : 1);
    return sa <=> sb;
  }
  if (a.negative_ != b.negative_) return a.negative_ ? std::strong_ordering::less : std::strong_ordering::greater;

  // Compare magnitudes: position of the most significant digit first.
  std::strong_ordering mag = std::strong_ordering::equal;
  const std::int64_t top_a = static_cast<std::int64_t>(a.digits_.size()) + a.exponent_;
  const std::int64_t top_b = static_cast<std::int64_t>(b.digits_.size()) + b.exponent_;
  if (top_a != top_b) {
    mag = top_a <=> top_b;
  } else {
    const std::size_t n = std::max(a.digits_.size(), b.digits_.size());
    for (std::size_t i = 0; i < n; ++i) {
      const char da = i < a.digits_.size() ? a.digits_[i] : '0';
      const char db = i < b.digits_.size() ? b.digits_[i] : '0';
      if (da != db) {
        mag = da <=> db;
        break;
      }
    }
  }
  if (a.negative_) return 0 <=> mag;
  return mag;
}

bool is_plain_decimal_literal(std::string_view text) {
  std::size_t i = 0;
  if (i < text.size() && (text[i] == '+' || text[i] == '-')) ++i;
  bool digits = false;
  while (i < text.size() && is_digit(text[i])) {
    ++i;
    digits = true;
  }
  if (i < text.size() && text[i] == '.') {
    ++i;
    while (i < text.size() && is_digit(text[i])) {
      ++i;
      digits = true;
    }
  }
  return digits && i == text.size();
}

// ------------------------------------------------------------ Constituent

Constituent Constituent::text(std::string_view value) {
  const auto trimmed = trim(value);
  if (is_plain_decimal_literal(trimmed)) {
    if (auto d = Decimal::parse(trimmed)) return number(std::move(*d));
  }
  return Constituent(std::string(trimmed));
}

std::string Constituent::key() const {
  switch (kind()) {
    case Kind::Null:
      return "N";
    case Kind::Number:
      return "#" + as_number().str();
    case Kind::Text:
      return "$" + as_text();
  }
  return {};
}

std::strong_ordering operator<=>(const Constituent& a, const Constituent& b) {
  if (a.kind() != b.kind()) return static_cast<int>(a.kind()) <=> static_cast<int>(b.kind());
  switch (a.kind()) {
    case Constituent::Kind::Null:
      return std::strong_ordering::equal;
    case Constituent::Kind::Number:
      return a.as_number() <=> b.as_number();
    case Constituent::Kind::Text:
      return a.as_text().compare(b.as_text()) <=> 0;
  }
  return std::strong_ordering::equal;
}

// ------------------------------------------------------- tuples and sets

namespace {

void append_framed(std::string& out, const std::string& piece) {
  out += std::to_string(piece.size());
  out.push_back(':');
  out += piece;
}

}  // namespace

AnswerTuple::AnswerTuple(std::vector<Constituent> values) : values_(std::move(values)) {
  if (values_.empty()) throw std::invalid_argument("answer tuple must have at least one constituent");
  sorted_ = values_;
  std::sort(sorted_.begin(), sorted_.end());
  for (const auto& c : sorted_) append_framed(key_, c.key());
}

AnswerSet::AnswerSet(std::vector<AnswerTuple> tuples) : tuples_(std::move(tuples)) {
  std::vector<const std::string*> keys;
  keys.reserve(tuples_.size());
  for (const auto& t : tuples_) keys.push_back(&t.key());
  std::sort(keys.begin(), keys.end(), [](const auto* a, const auto* b) { return *a < *b; });
  for (const auto* k : keys) append_framed(key_, *k);
}

AnswerSet AnswerSet::deduplicated() const {
  std::vector<AnswerTuple> out;
  std::vector<std::string> seen;
  for (const auto& t : tuples_) {
    std::vector<Constituent> unique;
    for (const auto& c : t.sorted()) {
      if (unique.empty() || !(unique.back() == c)) unique.push_back(c);
    }
    AnswerTuple reduced(std::move(unique));
    if (std::find(seen.begin(), seen.end(), reduced.key()) != seen.end()) continue;
    seen.push_back(reduced.key());
    out.push_back(std::move(reduced));
  }
  return AnswerSet(std::move(out));
}

// ---------------------------------------------------------------- parser

namespace {

class LiteralParser {
 public:
  explicit LiteralParser(std::string_view text) : text_(text) {}

  AnswerSet parse_answer() {
    skip_ws();
    if (!consume('[')) fail("expected '[' opening the answer list");
    std::vector<AnswerTuple> tuples;
    skip_ws();
    if (!consume(']')) {
      while (true) {
        skip_ws();
        tuples.push_back(parse_element());
        skip_ws();
        if (consume(',')) {
          skip_ws();
          if (consume(']')) break;  // trailing comma
          continue;
        }
        if (consume(']')) break;
        fail("expected ',' or ']' in answer list");
      }
    }
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing content");
    return AnswerSet(std::move(tuples));
  }

 private:
  [[noreturn]] void fail(const std::string& reason) const { throw ParseError(pos_, reason); }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }

  bool consume(char c) {
    if (peek() == c && !at_end()) {
      ++pos_;
      return true;
    }
    return false;
  }

  void skip_ws() {
    while (!at_end() && (peek() == ' ' || peek() == '\t' || peek() == '\n' || peek() == '\r')) ++pos_;
  }

  AnswerTuple parse_element() {
    const char open = peek();
    if (open == '(' || open == '[') {
      ++pos_;
      const char close = open == '(' ? ')' : ']';
      std::vector<Constituent> values;
      skip_ws();
      if (consume(close)) fail("empty tuple");
      while (true) {
        skip_ws();
        values.push_back(parse_scalar());
        skip_ws();
        if (consume(',')) {
          skip_ws();
          if (consume(close)) break;
          continue;
        }
        if (consume(close)) break;
        fail(std::string("expected ',' or '") + close + "' in tuple");
      }
      return AnswerTuple(std::move(values));
    }
    return AnswerTuple({parse_scalar()});
  }

  Constituent parse_scalar() {
    const char c = peek();
    if (c == '\'' || c == '"') return Constituent::text(parse_string());
    if (c == '\\') {
      if (text_.substr(pos_, 2) == "\\N") {
        pos_ += 2;
        return Constituent::null();
      }
      fail("unexpected backslash");
    }
    if (c == '-' || c == '+' || c == '.' || is_digit(c)) {
      const std::size_t start = pos_;
      while (!at_end() && (is_digit(peek()) || peek() == '.' || peek() == '-' || peek() == '+' ||
                           peek() == 'e' || peek() == 'E')) {
        ++pos_;
      }
      const auto token = text_.substr(start, pos_ - start);
      if (token == "-" || token == "+") {
        // -inf / +nan style identifiers
        const auto ident = parse_identifier();
        return Constituent::text(std::string(token) + ident);
      }
      auto d = Decimal::parse(token);
      if (!d) {
        pos_ = start;
        fail("malformed number '" + std::string(token) + "'");
      }
      return Constituent::number(std::move(*d));
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      std::string ident = parse_identifier();
      if (ident == "None" || ident == "null" || ident == "NULL" || ident == "NaT") {
        return Constituent::null();
      }
      skip_ws();
      if (consume('(')) {
        // Wrapper call, e.g. np.float64(0.5), Decimal('1.20'), Timestamp('...').
        skip_ws();
        Constituent inner = parse_scalar();
        skip_ws();
        if (!consume(')')) fail("expected ')' closing call to " + ident);
        return inner;
      }
      if (ident.empty()) {
        pos_ = start;
        fail("unexpected character");
      }
      // True/False/nan/inf and other bare words keep their spelling.
      return Constituent::text(ident);
    }
    fail(at_end() ? "unexpected end of input" : std::string("unexpected character '") + c + "'");
  }

  std::string parse_identifier() {
    std::string out;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '.')) {
      out.push_back(text_[pos_++]);
    }
    return out;
  }

  static void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }

  std::uint32_t parse_hex(std::size_t count) {
    if (pos_ + count > text_.size()) fail("truncated escape");
    std::uint32_t v = 0;
    auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + pos_ + count, v, 16);
    if (ec != std::errc{} || ptr != text_.data() + pos_ + count) fail("bad hex escape");
    pos_ += count;
    return v;
  }

  std::string parse_string() {
    const char quote = text_[pos_++];
    std::string out;
    while (true) {
      if (at_end()) fail("unterminated string");
      const char c = text_[pos_++];
      if (c == quote) break;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (at_end()) fail("unterminated escape");
      const char e = text_[pos_++];
      switch (e) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        case '0': out.push_back('\0'); break;
        case '\\': out.push_back('\\'); break;
        case '\'': out.push_back('\''); break;
        case '"': out.push_back('"'); break;
        case '/': out.push_back('/'); break;
        case 'x': append_utf8(out, parse_hex(2)); break;
        case 'u': append_utf8(out, parse_hex(4)); break;
        case 'U': append_utf8(out, parse_hex(8)); break;
        default:
          // Unknown escapes are kept verbatim, as Python does ('\N' stays "\N").
          out.push_back('\\');
          out.push_back(e);
      }
    }
    return out;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

AnswerSet canonicalize_answer(std::string_view raw_text) { return LiteralParser(raw_text).parse_answer(); }

// -------------------------------------------------------------- matching

namespace {

bool constituents_close(const Constituent& a, const Constituent& b, double rel_tol) {
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case Constituent::Kind::Null:
      return true;
    case Constituent::Kind::Text:
      return a.as_text() == b.as_text();
    case Constituent::Kind::Number: {
      if (a.as_number() == b.as_number()) return true;
      const double x = a.as_number().to_double();
      const double y = b.as_number().to_double();
      return std::fabs(x - y) <= rel_tol * std::max(std::fabs(x), std::fabs(y));
    }
  }
  return false;
}

// Kuhn's augmenting-path bipartite matching; returns true iff a perfect
// matching exists. Left and right sides have equal size n.
template <typename Compatible>
bool has_perfect_matching(std::size_t n, Compatible&& compatible) {
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (compatible(i, j)) adj[i].push_back(j);
    }
    if (adj[i].empty()) return false;
  }
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> match_right(n, kNone);
  std::vector<char> visited(n);
  auto augment = [&](auto& self, std::size_t u) -> bool {
    for (std::size_t v : adj[u]) {
      if (visited[v]) continue;
      visited[v] = 1;
      if (match_right[v] == kNone || self(self, match_right[v])) {
        match_right[v] = u;
        return true;
      }
    }
    return false;
  };
  for (std::size_t u = 0; u < n; ++u) {
    std::fill(visited.begin(), visited.end(), 0);
    if (!augment(augment, u)) return false;
  }
  return true;
}

// [first, last) of the Number block; canonical order is Null < Number < Text.
std::pair<std::size_t, std::size_t> number_block(const std::vector<Constituent>& sorted) {
  std::size_t first = 0;
  while (first < sorted.size() && sorted[first].kind() == Constituent::Kind::Null) ++first;
  std::size_t last = first;
  while (last < sorted.size() && sorted[last].kind() == Constituent::Kind::Number) ++last;
  return {first, last};
}

bool tuples_close(const AnswerTuple& a, const AnswerTuple& b, double rel_tol) {
  if (a.size() != b.size()) return false;
  if (a.key() == b.key()) return true;
  // Nulls and texts only pair with equal values, so their sorted runs must
  // coincide and only the numbers need a matching.
  const auto [a0, a1] = number_block(a.sorted());
  const auto [b0, b1] = number_block(b.sorted());
  if (a0 != b0 || a1 != b1) return false;
  for (std::size_t i = a1; i < a.size(); ++i) {
    if (a.sorted()[i] != b.sorted()[i]) return false;
  }
  return has_perfect_matching(a1 - a0, [&](std::size_t i, std::size_t j) {
    return constituents_close(a.sorted()[a0 + i], b.sorted()[b0 + j], rel_tol);
  });
}

}  // namespace

bool answers_match(const AnswerSet& pred, const AnswerSet& gold, const MatchConfig& cfg) {
  if (cfg.dedupe) {
    MatchConfig inner = cfg;
    inner.dedupe = false;
    return answers_match(pred.deduplicated(), gold.deduplicated(), inner);
  }
  if (pred.key() == gold.key()) return true;
  if (cfg.numeric_mode == NumericMode::Exact) return false;
  if (pred.size() != gold.size()) return false;
  return has_perfect_matching(pred.size(), [&](std::size_t i, std::size_t j) {
    return tuples_close(pred.tuples()[i], gold.tuples()[j], cfg.relative_tolerance);
  });
}

bool predictions_match(const Prediction& a, const Prediction& b, const MatchConfig& cfg) {
  if (!a || !b) return false;
  return answers_match(*a, *b, cfg);
}

MajorityResult majority_answer(std::span<const Prediction> candidates, SeededRandom& rng,
                               const MatchConfig& cfg) {
  if (candidates.empty()) throw EmptyInputError();

  struct Cluster {
    std::size_t representative;
    std::size_t size;
  };
  std::vector<Cluster> clusters;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    bool placed = false;
    if (candidates[i]) {
      for (auto& cluster : clusters) {
        if (predictions_match(candidates[cluster.representative], candidates[i], cfg)) {
          ++cluster.size;
          placed = true;
          break;
        }
      }
    }
    if (!placed) clusters.push_back({i, 1});
  }

  std::size_t best = 0;
  for (const auto& c : clusters) best = std::max(best, c.size);
  std::vector<std::size_t> tied;
  for (const auto& c : clusters) {
    if (c.size == best) tied.push_back(c.representative);
  }
  if (tied.size() == 1) return {candidates[tied.front()], true, best};
  const std::size_t pick = tied[rng.uniform_index(tied.size())];
  return {candidates[pick], false, best};
}

// ---------------------------------------------------------- serialization

nlohmann::json answer_to_json(const AnswerSet& answer) {
  auto doc = nlohmann::json::array();
  for (const auto& tuple : answer.tuples()) {
    auto row = nlohmann::json::array();
    for (const auto& c : tuple.values()) {
      switch (c.kind()) {
        case Constituent::Kind::Null: row.push_back(nullptr); break;
        case Constituent::Kind::Number: row.push_back(c.as_number().str()); break;
        case Constituent::Kind::Text: row.push_back(c.as_text()); break;
      }
    }
    doc.push_back(std::move(row));
  }
  return doc;
}

namespace {

Constituent constituent_from_json(const nlohmann::json& v, std::size_t position) {
  if (v.is_null()) return Constituent::null();
  if (v.is_string()) return Constituent::text(v.get<std::string>());
  if (v.is_number_integer()) {
    if (v.is_number_unsigned()) return Constituent::text(std::to_string(v.get<std::uint64_t>()));
    return Constituent::number(Decimal::from_int(v.get<std::int64_t>()));
  }
  if (v.is_number_float()) {
    if (auto d = Decimal::from_double(v.get<double>())) return Constituent::number(std::move(*d));
    throw ParseError(position, "non-finite number");
  }
  throw ParseError(position, "constituent must be null, a number or a string");
}

}  // namespace

AnswerSet answer_from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) throw ParseError(0, "answer must be a JSON array");
  std::vector<AnswerTuple> tuples;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& row = doc[i];
    if (row.is_array()) {
      if (row.empty()) throw ParseError(i, "empty tuple");
      std::vector<Constituent> values;
      for (const auto& v : row) values.push_back(constituent_from_json(v, i));
      tuples.emplace_back(std::move(values));
    } else {
      tuples.emplace_back(std::vector<Constituent>{constituent_from_json(row, i)});
    }
  }
  return AnswerSet(std::move(tuples));
}

std::string to_literal(const AnswerSet& answer) {
  std::string out = "[";
  bool first_tuple = true;
  for (const auto& tuple : answer.tuples()) {
    if (!first_tuple) out += ", ";
    first_tuple = false;
    out.push_back('(');
    bool first = true;
    for (const auto& c : tuple.values()) {
      if (!first) out += ", ";
      first = false;
      switch (c.kind()) {
        case Constituent::Kind::Null: out += "None"; break;
        case Constituent::Kind::Number: out += c.as_number().str(); break;
        case Constituent::Kind::Text: {
          out.push_back('\'');
          for (char ch : c.as_text()) {
            if (ch == '\\' || ch == '\'') out.push_back('\\');
            if (ch == '\n') {
              out += "\\n";
              continue;
            }
            out.push_back(ch);
          }
          out.push_back('\'');
          break;
        }
      }
    }
    if (tuple.size() == 1) out.push_back(',');
    out.push_back(')');
  }
  out.push_back(']');
  return out;
}

}  // namespace t2sc
