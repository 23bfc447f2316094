#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "t2sc/dataset.hpp"
#include "t2sc/error.hpp"
#include "t2sc/schema_context.hpp"

namespace t2sc {

enum class PromptKind { Text2Sql, Decomposer, Text2Python, SingleShot, Knowledge, RepairSql, RepairCode, RepairDecomposer };

inline constexpr std::array<PromptKind, 8> kAllPromptKinds = {
    PromptKind::Text2Sql,   PromptKind::Decomposer, PromptKind::Text2Python, PromptKind::SingleShot,
    PromptKind::Knowledge,  PromptKind::RepairSql,  PromptKind::RepairCode,  PromptKind::RepairDecomposer,
};

/// File stem of the kind's template, e.g. "repair_sql" -> templates/repair_sql.txt.
std::string_view template_name(PromptKind kind);

/// The output-format instruction injected through {format_rules}.
inline constexpr std::string_view kOutputFormatInstruction =
    "The final answer must be a list of tuples without any additional names or descriptions, "
    "and must not include any additional information, even if relevant.";

inline constexpr std::string_view kMultiSignature = "def compute_result(listOfDFs: List[DataFrame]) -> List[Tuple]:";
inline constexpr std::string_view kSingleSignature = "def compute_result(database_path: str) -> List[Tuple]:";

class TemplateError : public Error {
 public:
  using Error::Error;
};

class MissingExtras : public Error {
 public:
  MissingExtras(PromptKind kind, std::string_view what)
      : Error("prompt '" + std::string(template_name(kind)) + "' needs " + std::string(what)), kind_(kind) {}
  PromptKind kind() const noexcept { return kind_; }

 private:
  PromptKind kind_;
};

class NoBlockFound : public Error {
 public:
  explicit NoBlockFound(std::string_view tag) : Error("no ```" + std::string(tag) + " block found in the response") {}
};

/// Kind-specific material for render_prompt.
struct PromptExtras {
  /// Text2Sql in decomposed mode: the step replaces the question text.
  /// RepairSql: the instruction the failing query was answering.
  std::optional<std::string> step;
  std::optional<std::string> decomposition;
  std::optional<std::string> shapes;
  std::optional<std::string> artifact;
  std::optional<std::string> error;
  /// Per-database output conventions, appended after the format instruction.
  std::string format_rules;
};

/// Few-shot exemplars stored as exemplars/<domain>/<kind>.txt.
class ExemplarStore {
 public:
  static ExemplarStore load(const std::filesystem::path& dir);
  void add(std::string domain, PromptKind kind, std::string text);

  /// Concatenates exemplars for `kind` from every domain except
  /// `exclude_domain`, in domain-name order.
  std::string select(PromptKind kind, std::string_view exclude_domain) const;

 private:
  std::map<std::string, std::map<PromptKind, std::string>> by_domain_;
};

/// Immutable set of templates, validated when loaded.
class PromptLibrary {
 public:
  /// Reads templates/{kind}.txt for every kind. Throws TemplateError when a
  /// file is missing, uses an unknown placeholder or lacks a required one.
  static PromptLibrary load(const std::filesystem::path& template_dir, ExemplarStore exemplars = {});
  /// Validates and installs templates supplied in memory.
  static PromptLibrary from_templates(std::map<PromptKind, std::string> templates, ExemplarStore exemplars = {});

  std::string render(PromptKind kind, const DbSchemaContext& ctx, const Question& q, const PromptExtras& extras) const;

  const std::string& raw(PromptKind kind) const { return templates_.at(kind); }

 private:
  std::map<PromptKind, std::string> templates_;
  ExemplarStore exemplars_;
};

/// Returns the content of the last fenced block whose info string equals
/// `tag` (case-insensitive), else of the last bare fenced block.
/// Throws NoBlockFound.
std::string extract_fenced(std::string_view text, std::string_view tag);

enum class StepKind { Sql, Code };

struct DecompositionStep {
  StepKind kind;
  std::string text;
  friend bool operator==(const DecompositionStep&, const DecompositionStep&) = default;
};

struct Decomposition {
  std::vector<DecompositionStep> steps;
  std::string cot_preamble;
  std::vector<std::string> warnings;

  std::size_t sql_step_count() const;
  bool has_code_steps() const;
  std::vector<std::string> sql_steps() const;
  /// One "Text2SQL: ..." / "Python: ..." line per step.
  std::string render() const;
};

class DecompositionError : public Error {
 public:
  enum class Reason { NoMarker, NoSqlSteps };
  DecompositionError(Reason reason, const std::string& what) : Error(what), reason_(reason) {}
  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

/// Splits decomposer output at the last "Decomposition:" line. Following
/// lines must start with "Text2SQL:" or "Python:"; others are skipped with a
/// warning. SQL steps that appear to reference other steps' outputs are
/// flagged in warnings but kept.
Decomposition parse_decomposition(std::string_view text);

}  // namespace t2sc
