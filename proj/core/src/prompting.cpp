#include "t2sc/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace t2sc {

namespace {

constexpr std::array<std::string_view, 9> kPlaceholders = {
    "schema", "question", "step", "shapes", "decomposition", "error", "artifact", "exemplars", "format_rules",
};

std::vector<std::string_view> required_placeholders(PromptKind kind) {
  switch (kind) {
    case PromptKind::Text2Sql: return {"schema", "question", "format_rules"};
    case PromptKind::Decomposer: return {"schema", "question", "format_rules", "exemplars"};
    case PromptKind::Text2Python: return {"question", "decomposition", "shapes", "format_rules"};
    case PromptKind::SingleShot: return {"schema", "question", "format_rules", "exemplars"};
    case PromptKind::Knowledge: return {"question", "format_rules"};
    case PromptKind::RepairSql: return {"step", "artifact", "error", "format_rules"};
    case PromptKind::RepairCode: return {"question", "artifact", "error", "format_rules"};
    case PromptKind::RepairDecomposer: return {"question", "artifact", "error", "format_rules"};
  }
  return {};
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool is_placeholder_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

/// Finds `{name}` tokens where name is a lowercase identifier.
std::vector<std::pair<std::size_t, std::string>> scan_placeholders(std::string_view tpl) {
  std::vector<std::pair<std::size_t, std::string>> found;
  for (std::size_t i = 0; i < tpl.size(); ++i) {
    if (tpl[i] != '{') continue;
    std::size_t j = i + 1;
    while (j < tpl.size() && is_placeholder_char(tpl[j])) ++j;
    if (j > i + 1 && j < tpl.size() && tpl[j] == '}') found.emplace_back(i, std::string(tpl.substr(i + 1, j - i - 1)));
  }
  return found;
}

void validate_template(PromptKind kind, const std::string& tpl) {
  std::set<std::string> present;
  for (const auto& [pos, name] : scan_placeholders(tpl)) {
    if (std::find(kPlaceholders.begin(), kPlaceholders.end(), name) == kPlaceholders.end()) {
      throw TemplateError("template '" + std::string(template_name(kind)) + "' uses unknown placeholder {" + name + "}");
    }
    present.insert(name);
  }
  for (auto name : required_placeholders(kind)) {
    if (!present.count(std::string(name))) {
      throw TemplateError("template '" + std::string(template_name(kind)) + "' is missing placeholder {" +
                          std::string(name) + "}");
    }
  }
  if (tpl.find(kOutputFormatInstruction) != std::string::npos) {
    throw TemplateError("template '" + std::string(template_name(kind)) +
                        "' must take the output-format instruction from {format_rules}");
  }
}

std::optional<PromptKind> kind_from_name(std::string_view name) {
  for (auto kind : kAllPromptKinds) {
    if (template_name(kind) == name) return kind;
  }
  return std::nullopt;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string_view template_name(PromptKind kind) {
  switch (kind) {
    case PromptKind::Text2Sql: return "text2sql";
    case PromptKind::Decomposer: return "decomposer";
    case PromptKind::Text2Python: return "text2python";
    case PromptKind::SingleShot: return "single_shot";
    case PromptKind::Knowledge: return "knowledge";
    case PromptKind::RepairSql: return "repair_sql";
    case PromptKind::RepairCode: return "repair_code";
    case PromptKind::RepairDecomposer: return "repair_decomposer";
  }
  return "unknown";
}

// --------------------------------------------------------------- exemplars

ExemplarStore ExemplarStore::load(const std::filesystem::path& dir) {
  ExemplarStore store;
  if (!std::filesystem::is_directory(dir)) return store;
  for (const auto& domain : std::filesystem::directory_iterator(dir)) {
    if (!domain.is_directory()) continue;
    for (const auto& file : std::filesystem::directory_iterator(domain.path())) {
      if (file.path().extension() != ".txt") continue;
      if (auto kind = kind_from_name(file.path().stem().string())) {
        store.add(domain.path().filename().string(), *kind, read_file(file.path()));
      }
    }
  }
  return store;
}

void ExemplarStore::add(std::string domain, PromptKind kind, std::string text) {
  by_domain_[std::move(domain)][kind] = std::move(text);
}

std::string ExemplarStore::select(PromptKind kind, std::string_view exclude_domain) const {
  std::string out;
  for (const auto& [domain, kinds] : by_domain_) {
    if (domain == exclude_domain) continue;
    auto it = kinds.find(kind);
    if (it == kinds.end()) continue;
    if (!out.empty()) out += "\n";
    out += trim(it->second);
    out += "\n";
  }
  return out.empty() ? std::string("(no examples available)\n") : out;
}

// ----------------------------------------------------------------- library

PromptLibrary PromptLibrary::load(const std::filesystem::path& template_dir, ExemplarStore exemplars) {
  std::map<PromptKind, std::string> templates;
  for (auto kind : kAllPromptKinds) {
    const auto path = template_dir / (std::string(template_name(kind)) + ".txt");
    if (!std::filesystem::is_regular_file(path)) throw TemplateError("missing template " + path.string());
    templates[kind] = read_file(path);
  }
  return from_templates(std::move(templates), std::move(exemplars));
}

PromptLibrary PromptLibrary::from_templates(std::map<PromptKind, std::string> templates, ExemplarStore exemplars) {
  PromptLibrary lib;
  for (auto kind : kAllPromptKinds) {
    auto it = templates.find(kind);
    if (it == templates.end()) throw TemplateError("missing template '" + std::string(template_name(kind)) + "'");
    validate_template(kind, it->second);
  }
  lib.templates_ = std::move(templates);
  lib.exemplars_ = std::move(exemplars);
  return lib;
}

std::string PromptLibrary::render(PromptKind kind, const DbSchemaContext& ctx, const Question& q,
                                  const PromptExtras& extras) const {
  const std::string& tpl = templates_.at(kind);

  auto need = [&](const std::optional<std::string>& value, std::string_view what) -> const std::string& {
    if (!value) throw MissingExtras(kind, what);
    return *value;
  };

  std::string format_rules(kOutputFormatInstruction);
  if (!trim(extras.format_rules).empty()) {
    format_rules += "\n";
    format_rules += trim(extras.format_rules);
  }

  std::string out;
  out.reserve(tpl.size() * 2);
  std::size_t cursor = 0;
  for (const auto& [pos, name] : scan_placeholders(tpl)) {
    out.append(tpl, cursor, pos - cursor);
    cursor = pos + name.size() + 2;
    if (name == "schema") {
      out += render_context(ctx);
    } else if (name == "question") {
      out += (kind == PromptKind::Text2Sql && extras.step) ? *extras.step : q.text;
    } else if (name == "step") {
      out += need(extras.step, "a step text");
    } else if (name == "shapes") {
      out += need(extras.shapes, "dataframe shapes");
    } else if (name == "decomposition") {
      out += need(extras.decomposition, "a decomposition");
    } else if (name == "error") {
      out += need(extras.error, "the captured error");
    } else if (name == "artifact") {
      out += need(extras.artifact, "the failing artifact");
    } else if (name == "exemplars") {
      out += exemplars_.select(kind == PromptKind::RepairDecomposer ? PromptKind::Decomposer : kind, q.db_id);
    } else if (name == "format_rules") {
      out += format_rules;
    }
  }
  out.append(tpl, cursor, std::string::npos);
  return out;
}

// ----------------------------------------------------------- fenced blocks

std::string extract_fenced(std::string_view text, std::string_view tag) {
  constexpr std::string_view kFence = "```";
  const std::string want = lower(tag);
  std::optional<std::string> last_tagged;
  std::optional<std::string> last_bare;

  std::size_t pos = 0;
  while (true) {
    const auto open = text.find(kFence, pos);
    if (open == std::string_view::npos) break;
    std::size_t i = open + kFence.size();
    const std::size_t info_start = i;
    while (i < text.size() && (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_' ||
                               text[i] == '+' || text[i] == '-' || text[i] == '.')) {
      ++i;
    }
    std::string info(text.substr(info_start, i - info_start));
    // A word glued to closing backticks (```SELECT 1```) is content, not info.
    if (!info.empty() && text.substr(i, kFence.size()) == kFence) {
      info.clear();
      i = info_start;
    }
    auto close = text.find(kFence, i);
    // One-line fence (```SELECT 1 FROM t```): the first word is only a tag
    // when it is the one asked for.
    if (!info.empty() && lower(info) != want) {
      const auto eol = text.find('\n', i);
      if (close != std::string_view::npos && (eol == std::string_view::npos || close < eol)) {
        info.clear();
        i = info_start;
        close = text.find(kFence, i);
      }
    }
    const std::string_view body =
        close == std::string_view::npos ? text.substr(i) : text.substr(i, close - i);
    std::string content(trim(body));
    if (info.empty()) {
      last_bare = std::move(content);
    } else if (lower(info) == want) {
      last_tagged = std::move(content);
    }
    if (close == std::string_view::npos) break;
    pos = close + kFence.size();
  }
  if (last_tagged) return *last_tagged;
  if (last_bare) return *last_bare;
  throw NoBlockFound(tag);
}

// ----------------------------------------------------------- decomposition

std::size_t Decomposition::sql_step_count() const {
  return static_cast<std::size_t>(
      std::count_if(steps.begin(), steps.end(), [](const auto& s) { return s.kind == StepKind::Sql; }));
}

bool Decomposition::has_code_steps() const {
  return std::any_of(steps.begin(), steps.end(), [](const auto& s) { return s.kind == StepKind::Code; });
}

std::vector<std::string> Decomposition::sql_steps() const {
  std::vector<std::string> out;
  for (const auto& s : steps) {
    if (s.kind == StepKind::Sql) out.push_back(s.text);
  }
  return out;
}

std::string Decomposition::render() const {
  std::string out;
  for (const auto& s : steps) {
    out += s.kind == StepKind::Sql ? "Text2SQL: " : "Python: ";
    out += s.text;
    out += "\n";
  }
  return out;
}

namespace {

std::string_view strip_list_marker(std::string_view line) {
  if (line.starts_with("- ") || line.starts_with("* ") || line.starts_with("• ")) {
    return trim(line.substr(line.find(' ') + 1));
  }
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) return trim(line.substr(i + 1));
  return line;
}

std::string_view strip_emphasis(std::string_view s) {
  while (!s.empty() && (s.front() == '*' || s.front() == '#' || s.front() == '`')) s.remove_prefix(1);
  return trim(s);
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && lower(s.substr(0, prefix.size())) == lower(prefix);
}

const std::regex& dependency_pattern() {
  static const std::regex re(
      R"(previous step|prior step|identified above|obtained above|from step \d|in step \d|above step|from the above)",
      std::regex::icase | std::regex::optimize);
  return re;
}

}  // namespace

Decomposition parse_decomposition(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    lines.push_back(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }

  constexpr std::string_view kMarker = "Decomposition:";
  std::optional<std::size_t> marker_line;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (starts_with_ci(strip_emphasis(trim(lines[i])), kMarker)) marker_line = i;
  }
  if (!marker_line) throw DecompositionError(DecompositionError::Reason::NoMarker, "no 'Decomposition:' line found");

  Decomposition out;
  for (std::size_t i = 0; i < *marker_line; ++i) {
    out.cot_preamble += lines[i];
    out.cot_preamble += "\n";
  }

  std::vector<std::string_view> candidates;
  {
    std::string_view first = strip_emphasis(trim(lines[*marker_line]));
    first = strip_emphasis(trim(first.substr(kMarker.size())));
    if (!first.empty()) candidates.push_back(first);
  }
  for (std::size_t i = *marker_line + 1; i < lines.size(); ++i) candidates.push_back(lines[i]);

  for (auto raw : candidates) {
    const auto line = strip_emphasis(strip_list_marker(trim(raw)));
    if (line.empty()) continue;
    StepKind kind;
    std::string_view rest;
    if (starts_with_ci(line, "Text2SQL:")) {
      kind = StepKind::Sql;
      rest = line.substr(9);
    } else if (starts_with_ci(line, "Python:")) {
      kind = StepKind::Code;
      rest = line.substr(7);
    } else {
      out.warnings.push_back("skipped line without a step prefix: " + std::string(line));
      continue;
    }
    rest = strip_emphasis(trim(rest));
    if (rest.empty()) {
      out.warnings.push_back("skipped empty step");
      continue;
    }
    if (kind == StepKind::Sql && std::regex_search(rest.begin(), rest.end(), dependency_pattern())) {
      out.warnings.push_back("SQL step may depend on another step's output: " + std::string(rest));
    }
    out.steps.push_back({kind, std::string(rest)});
  }

  if (out.sql_step_count() == 0) {
    throw DecompositionError(DecompositionError::Reason::NoSqlSteps, "decomposition has no Text2SQL step");
  }
  return out;
}

}  // namespace t2sc
