#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "t2sc/evaluator.hpp"

namespace t2sc {

std::string format_pct(double value) {
  const double v = std::round(value * 10.0) / 10.0;
  return fmt::format("{:.1f}", v == 0.0 ? 0.0 : v);
}

std::string format_delta(double value) {
  const double v = std::round(value * 10.0) / 10.0;
  if (v == 0.0) return "0.0";
  return fmt::format("{:+.1f}", v);
}

nlohmann::json report_to_json(const Report& r) {
  auto methods = nlohmann::json::array();
  for (const auto& m : r.methods) {
    methods.push_back({
        {"method", m.method},
        {"overall", m.overall},
        {"by_db", m.by_db},
        {"by_category", m.by_category},
        {"mean_calls", m.mean_calls},
        {"runs", m.runs},
        {"traces", m.traces},
    });
  }
  return {{"db_ids", r.db_ids}, {"methods", std::move(methods)}, {"warnings", r.warnings}};
}

Report report_from_json(const nlohmann::json& doc) {
  Report r;
  try {
    r.db_ids = doc.at("db_ids").get<std::vector<std::string>>();
    for (const auto& m : doc.at("methods")) {
      MethodScore s;
      s.method = m.at("method").get<std::string>();
      s.overall = m.at("overall").get<double>();
      s.by_db = m.at("by_db").get<std::map<std::string, double>>();
      s.by_category = m.at("by_category").get<std::map<std::string, double>>();
      s.mean_calls = m.at("mean_calls").get<double>();
      s.runs = m.at("runs").get<int>();
      s.traces = m.at("traces").get<std::size_t>();
      r.methods.push_back(std::move(s));
    }
    r.warnings = doc.value("warnings", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string report_to_markdown(const Report& r) {
  std::string out = "| Method | Overall |";
  std::string rule = "|---|---:|";
  for (const auto& db : r.db_ids) {
    out += " " + db + " |";
    rule += "---:|";
  }
  out += " Calls |\n" + rule + "---:|\n";
  for (const auto& m : r.methods) {
    out += "| " + m.method + " | " + format_pct(m.overall) + " |";
    for (const auto& db : r.db_ids) {
      auto it = m.by_db.find(db);
      out += " " + (it == m.by_db.end() ? std::string("-") : format_pct(it->second)) + " |";
    }
    out += " " + fmt::format("{:.1f}", m.mean_calls) + " |\n";
  }
  return out;
}

std::string categories_to_markdown(const Report& r) {
  std::vector<std::string> cats;
  for (const auto& m : r.methods) {
    for (const auto& [cat, _] : m.by_category) {
      if (std::find(cats.begin(), cats.end(), cat) == cats.end()) cats.push_back(cat);
    }
  }
  std::sort(cats.begin(), cats.end());
  std::string out = "| Method |";
  std::string rule = "|---|";
  for (const auto& c : cats) {
    out += " " + c + " |";
    rule += "---:|";
  }
  out += "\n" + rule + "\n";
  for (const auto& m : r.methods) {
    out += "| " + m.method + " |";
    for (const auto& c : cats) {
      auto it = m.by_category.find(c);
      out += " " + (it == m.by_category.end() ? std::string("-") : format_pct(it->second)) + " |";
    }
    out += "\n";
  }
  return out;
}

nlohmann::json routing_to_json(const std::vector<RoutingRow>& rows) {
  auto arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({
        {"method", r.method},
        {"questions", r.questions},
        {"reference_correct", r.reference_correct},
        {"reference_incorrect", r.reference_incorrect},
        {"pct_full", r.pct_full},
        {"delta_correct", r.delta_correct ? nlohmann::json(*r.delta_correct) : nlohmann::json(nullptr)},
        {"delta_incorrect", r.delta_incorrect ? nlohmann::json(*r.delta_incorrect) : nlohmann::json(nullptr)},
    });
  }
  return arr;
}

std::vector<RoutingRow> routing_from_json(const nlohmann::json& doc) {
  std::vector<RoutingRow> rows;
  try {
    for (const auto& j : doc) {
      RoutingRow r;
      r.method = j.at("method").get<std::string>();
      r.questions = j.at("questions").get<std::size_t>();
      r.reference_correct = j.at("reference_correct").get<std::size_t>();
      r.reference_incorrect = j.at("reference_incorrect").get<std::size_t>();
      r.pct_full = j.at("pct_full").get<double>();
      if (!j.at("delta_correct").is_null()) r.delta_correct = j["delta_correct"].get<double>();
      if (!j.at("delta_incorrect").is_null()) r.delta_incorrect = j["delta_incorrect"].get<double>();
      rows.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed routing table: ") + e.what());
  }
  return rows;
}

std::string routing_to_markdown(const std::vector<RoutingRow>& rows) {
  std::string out = "| Method | Full | Text2SQL correct | Text2SQL incorrect |\n|---|---:|---:|---:|\n";
  for (const auto& r : rows) {
    out += fmt::format("| {} | {} | {} | {} |\n", r.method, format_pct(r.pct_full),
                       r.delta_correct ? format_delta(*r.delta_correct) : "-",
                       r.delta_incorrect ? format_delta(*r.delta_incorrect) : "-");
  }
  return out;
}

}  // namespace t2sc
