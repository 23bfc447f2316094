#pragma once

// Canonical answer representation and set-match equivalence.
//
// An answer is a multiset of tuples; a tuple is a multiset of constituents.
// Neither the order of tuples nor the order of values inside a tuple carries
// meaning, so every value computes a canonical key that is invariant under
// both permutations. Exact-mode matching is key equality.

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "t2sc/random.hpp"

namespace t2sc {

/// Exact decimal number. Stored as sign, significand digits and a base-10
/// exponent; the canonical rendering is plain positional notation with no
/// leading '+', no superfluous leading zeros and no trailing fractional zeros.
class Decimal {
 public:
  Decimal() = default;

  /// Accepts `[+-]?(digits[.digits?]|.digits)([eE][+-]?digits)?`.
  static std::optional<Decimal> parse(std::string_view text);
  static Decimal from_int(std::int64_t value);
  /// Shortest round-trip rendering of a double; nullopt for NaN and infinities.
  static std::optional<Decimal> from_double(double value);

  const std::string& str() const noexcept { return canonical_; }
  /// Nearest double; computed once at construction.
  double to_double() const noexcept { return approx_; }
  bool is_zero() const noexcept { return digits_ == "0"; }

  friend bool operator==(const Decimal& a, const Decimal& b) noexcept {
    return a.canonical_ == b.canonical_;
  }
  friend std::strong_ordering operator<=>(const Decimal& a, const Decimal& b) noexcept;

 private:
  Decimal(bool negative, std::string digits, std::int32_t exponent);

  bool negative_ = false;
  std::string digits_ = "0";  // no leading zeros, no trailing zeros unless "0"
  std::int32_t exponent_ = 0;
  std::string canonical_ = "0";
  double approx_ = 0.0;
};

/// True when `text` is a plain decimal literal (no exponent), e.g. "12",
/// "-0.50", "+3.", ".25".
bool is_plain_decimal_literal(std::string_view text);

class Constituent {
 public:
  enum class Kind { Null, Number, Text };

  static Constituent null() { return Constituent(std::monostate{}); }
  static Constituent number(Decimal value) { return Constituent(std::move(value)); }
  /// Trims surrounding whitespace. Text that is a plain decimal literal
  /// becomes a Number, so "1934" and 1934 compare equal and the canonical
  /// JSON encoding (numbers as strings) reads back losslessly.
  static Constituent text(std::string_view value);

  Kind kind() const noexcept { return static_cast<Kind>(value_.index()); }
  bool is_null() const noexcept { return kind() == Kind::Null; }
  const Decimal& as_number() const { return std::get<Decimal>(value_); }
  const std::string& as_text() const { return std::get<std::string>(value_); }

  /// Injective encoding used to build tuple keys.
  std::string key() const;

  friend bool operator==(const Constituent&, const Constituent&) = default;
  /// Null < Number (by value) < Text (lexicographic).
  friend std::strong_ordering operator<=>(const Constituent& a, const Constituent& b);

 private:
  using Value = std::variant<std::monostate, Decimal, std::string>;
  explicit Constituent(Value v) : value_(std::move(v)) {}
  Value value_;
};

class AnswerTuple {
 public:
  /// Throws std::invalid_argument when `values` is empty.
  explicit AnswerTuple(std::vector<Constituent> values);

  const std::vector<Constituent>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  /// Constituents in canonical order.
  const std::vector<Constituent>& sorted() const noexcept { return sorted_; }
  const std::string& key() const noexcept { return key_; }

 private:
  std::vector<Constituent> values_;
  std::vector<Constituent> sorted_;
  std::string key_;
};

class AnswerSet {
 public:
  AnswerSet() : AnswerSet(std::vector<AnswerTuple>{}) {}
  explicit AnswerSet(std::vector<AnswerTuple> tuples);

  const std::vector<AnswerTuple>& tuples() const noexcept { return tuples_; }
  std::size_t size() const noexcept { return tuples_.size(); }
  bool empty() const noexcept { return tuples_.empty(); }
  /// Equal keys iff set-match equal under exact constituent equality
  /// (multiset semantics at both levels).
  const std::string& key() const noexcept { return key_; }

  /// Collapses duplicate tuples and duplicate constituents inside a tuple.
  AnswerSet deduplicated() const;

 private:
  std::vector<AnswerTuple> tuples_;
  std::string key_;
};

enum class NumericMode { Exact, Epsilon };

struct MatchConfig {
  NumericMode numeric_mode = NumericMode::Exact;
  /// Relative tolerance used in Epsilon mode.
  double relative_tolerance = 1e-6;
  /// Set semantics instead of multiset semantics.
  bool dedupe = false;
};

/// Parses model or sandbox output: a bracketed list of parenthesized (or
/// bracketed) tuples of string, numeric and null literals. Bare scalars in
/// the list become 1-tuples. `None`, `null`, `NULL` and `\N` are Null.
/// Wrapper calls such as `np.float64(0.5)` are unwrapped to their argument.
AnswerSet canonicalize_answer(std::string_view raw_text);

bool answers_match(const AnswerSet& pred, const AnswerSet& gold, const MatchConfig& cfg = {});

/// A failed run. Never matches anything, including another failure.
using Prediction = std::optional<AnswerSet>;

bool predictions_match(const Prediction& a, const Prediction& b, const MatchConfig& cfg = {});

struct MajorityResult {
  Prediction answer;
  bool is_majority = false;
  std::size_t cluster_size = 0;
};

/// Plurality vote. A unique largest cluster wins with is_majority=true;
/// ties are broken uniformly at random with is_majority=false.
/// Throws EmptyInputError on an empty list.
MajorityResult majority_answer(std::span<const Prediction> candidates, SeededRandom& rng,
                               const MatchConfig& cfg = {});

/// Canonical on-disk form: array of arrays of null / decimal-string / string.
nlohmann::json answer_to_json(const AnswerSet& answer);
/// Accepts the canonical form plus plain JSON numbers. Throws ParseError.
AnswerSet answer_from_json(const nlohmann::json& doc);

/// Python-style literal, e.g. `[('a', 1), (None,)]`; reads back through
/// canonicalize_answer.
std::string to_literal(const AnswerSet& answer);

}  // namespace t2sc
