#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "t2sc/answer.hpp"
#include "t2sc/error.hpp"

namespace t2sc {

class FormatError : public Error {
 public:
  FormatError(std::size_t line, const std::string& reason)
      : Error("line " + std::to_string(line) + ": " + reason), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateIdError : public Error {
 public:
  explicit DuplicateIdError(const std::string& id) : Error("duplicate question id: " + id), id_(id) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class RegistryError : public Error {
 public:
  using Error::Error;
};

struct Question {
  std::string id;
  std::string db_id;
  std::string text;
  std::vector<std::string> categories;
  AnswerSet gold;
  std::optional<std::string> reference_code;
};

/// Reasoning categories documented for analytical question sets. Tags are
/// free strings; this list is informational and never enforced.
inline constexpr std::array<std::string_view, 12> kReasoningCategories = {
    "Stat./Math. Operations",
    "Analytics over Non-entries in Database",
    "Nested Queries",
    "String Manipulation",
    "Calculations over Aggregate Analytics",
    "Complex Columns",
    "Temporal Reasoning",
    "Complex Filtering",
    "Unit Conversions",
    "Scenario Understanding",
    "Time Series Analysis",
    "Commonsense Knowledge",
};

/// Reads a JSON-lines question file. Blank lines are skipped.
/// Throws FormatError or DuplicateIdError.
std::vector<Question> load_dataset(const std::filesystem::path& path);
std::vector<Question> parse_dataset(std::istream& in);

nlohmann::json question_to_json(const Question& q);
void write_dataset(std::span<const Question> questions, std::ostream& out);

/// Each tag counts once per question; a question may feed several tags.
std::map<std::string, std::size_t> category_histogram(std::span<const Question> questions);

struct CategoricalColumn {
  std::string table;
  std::string column;
  std::string description;
};

struct DbEntry {
  std::string db_id;
  std::filesystem::path path;
  std::string name;
  /// Domain guidance appended verbatim to the schema context.
  std::string notes;
  /// Per-database output conventions (date formats, naming rules, ...).
  std::string format_rules;
  /// How SQL NULL is shown in sample rows.
  std::string null_literal = "None";
  std::vector<CategoricalColumn> categorical;
  /// table -> column -> description
  std::map<std::string, std::map<std::string, std::string>> column_descriptions;
};

/// db_id -> database. Every file is verified to open read-only on load.
class DbRegistry {
 public:
  /// Config is a JSON object: db_id -> {path, name, notes_path?,
  /// format_rules_path?, categorical_path?, descriptions_path?, null_literal?}.
  /// Relative paths resolve against the config file's directory.
  static DbRegistry load(const std::filesystem::path& config_path);

  void add(DbEntry entry);
  const DbEntry& at(const std::string& db_id) const;
  bool contains(const std::string& db_id) const { return entries_.count(db_id) != 0; }
  const std::map<std::string, DbEntry>& entries() const noexcept { return entries_; }

 private:
  std::map<std::string, DbEntry> entries_;
};

}  // namespace t2sc
