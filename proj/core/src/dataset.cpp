#include "t2sc/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "t2sc/database.hpp"

namespace t2sc {

namespace {

std::string require_string(const nlohmann::json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end()) throw FormatError(line, std::string("missing field '") + field + "'");
  if (!it->is_string()) throw FormatError(line, std::string("field '") + field + "' must be a string");
  return it->get<std::string>();
}

Question parse_question(const nlohmann::json& obj, std::size_t line) {
  if (!obj.is_object()) throw FormatError(line, "expected a JSON object");
  Question q;
  q.id = require_string(obj, "id", line);
  q.db_id = require_string(obj, "db_id", line);
  q.text = require_string(obj, "question", line);

  auto answer = obj.find("answer");
  if (answer == obj.end()) throw FormatError(line, "missing field 'answer'");
  try {
    q.gold = answer_from_json(*answer);
  } catch (const ParseError& e) {
    throw FormatError(line, "bad answer: " + e.reason());
  }

  if (auto cats = obj.find("categories"); cats != obj.end() && !cats->is_null()) {
    if (!cats->is_array()) throw FormatError(line, "field 'categories' must be an array");
    for (const auto& c : *cats) {
      if (!c.is_string()) throw FormatError(line, "categories must be strings");
      q.categories.push_back(c.get<std::string>());
    }
  }
  if (auto code = obj.find("reference_code"); code != obj.end() && !code->is_null()) {
    if (!code->is_string()) throw FormatError(line, "field 'reference_code' must be a string");
    q.reference_code = code->get<std::string>();
  }
  return q;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RegistryError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw RegistryError(path.string() + ": " + e.what());
  }
}

}  // namespace

std::vector<Question> parse_dataset(std::istream& in) {
  std::vector<Question> out;
  std::set<std::string> ids;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(line, e.what());
    }
    Question q = parse_question(obj, line);
    if (!ids.insert(q.id).second) throw DuplicateIdError(q.id);
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<Question> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(0, "cannot open dataset " + path.string());
  return parse_dataset(in);
}

nlohmann::json question_to_json(const Question& q) {
  nlohmann::json obj = {
      {"id", q.id},
      {"db_id", q.db_id},
      {"question", q.text},
      {"answer", answer_to_json(q.gold)},
      {"categories", q.categories},
  };
  if (q.reference_code) obj["reference_code"] = *q.reference_code;
  return obj;
}

void write_dataset(std::span<const Question> questions, std::ostream& out) {
  for (const auto& q : questions) out << question_to_json(q).dump() << '\n';
}

std::map<std::string, std::size_t> category_histogram(std::span<const Question> questions) {
  std::map<std::string, std::size_t> counts;
  for (const auto& q : questions) {
    std::set<std::string> unique(q.categories.begin(), q.categories.end());
    for (const auto& c : unique) ++counts[c];
  }
  return counts;
}

// ------------------------------------------------------------- registry

DbRegistry DbRegistry::load(const std::filesystem::path& config_path) {
  const auto doc = read_json_file(config_path);
  if (!doc.is_object()) throw RegistryError(config_path.string() + ": expected an object keyed by db_id");
  const auto base = config_path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
  };

  DbRegistry registry;
  for (const auto& [db_id, spec] : doc.items()) {
    if (!spec.is_object() || !spec.contains("path")) {
      throw RegistryError("registry entry '" + db_id + "' needs a 'path'");
    }
    DbEntry entry;
    entry.db_id = db_id;
    entry.path = resolve(spec.at("path").get<std::string>());
    entry.name = spec.value("name", db_id);
    entry.null_literal = spec.value("null_literal", std::string("None"));
    if (spec.contains("notes_path")) entry.notes = read_text_file(resolve(spec["notes_path"].get<std::string>()));
    if (spec.contains("format_rules_path")) {
      entry.format_rules = read_text_file(resolve(spec["format_rules_path"].get<std::string>()));
    }
    if (spec.contains("categorical_path")) {
      const auto cats = read_json_file(resolve(spec["categorical_path"].get<std::string>()));
      if (!cats.is_array()) throw RegistryError("categorical config for '" + db_id + "' must be a list");
      for (const auto& c : cats) {
        entry.categorical.push_back(
            {c.at("table").get<std::string>(), c.at("column").get<std::string>(), c.value("description", "")});
      }
    }
    if (spec.contains("descriptions_path")) {
      const auto desc = read_json_file(resolve(spec["descriptions_path"].get<std::string>()));
      for (const auto& [table, cols] : desc.items()) {
        for (const auto& [col, text] : cols.items()) entry.column_descriptions[table][col] = text.get<std::string>();
      }
    }
    registry.add(std::move(entry));
  }
  return registry;
}

void DbRegistry::add(DbEntry entry) {
  try {
    (void)Database::open_read_only(entry.path);
  } catch (const DbOpenError& e) {
    throw RegistryError("database '" + entry.db_id + "': " + e.what());
  }
  const std::string id = entry.db_id;
  entries_.insert_or_assign(id, std::move(entry));
}

const DbEntry& DbRegistry::at(const std::string& db_id) const {
  auto it = entries_.find(db_id);
  if (it == entries_.end()) throw RegistryError("unknown db_id '" + db_id + "'");
  return it->second;
}

}  // namespace t2sc
