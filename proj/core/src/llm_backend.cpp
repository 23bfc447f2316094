#include "t2sc/llm_backend.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <utility>

#include <nlohmann/json.hpp>

namespace t2sc {

namespace {

constexpr std::array<std::pair<CallTag, std::string_view>, 7> kTagNames = {{
    {CallTag::Text2Sql, "text2sql"},
    {CallTag::Decomposer, "decomposer"},
    {CallTag::Text2Python, "text2python"},
    {CallTag::SingleShot, "single_shot"},
    {CallTag::Knowledge, "knowledge"},
    {CallTag::RepairSql, "repair_sql"},
    {CallTag::RepairCode, "repair_code"},
}};

nlohmann::json scope_to_json(const RunKey& key) {
  return {{"question_id", key.question_id}, {"method", key.method}, {"run", key.run}};
}

RunKey scope_from_json(const nlohmann::json& j) {
  return {j.at("question_id").get<std::string>(), j.at("method").get<std::string>(), j.at("run").get<int>()};
}

}  // namespace

std::string_view to_string(CallTag tag) {
  for (const auto& [t, name] : kTagNames) {
    if (t == tag) return name;
  }
  return "unknown";
}

CallTag parse_call_tag(std::string_view name) {
  for (const auto& [t, n] : kTagNames) {
    if (n == name) return t;
  }
  throw Error("unknown call tag '" + std::string(name) + "'");
}

std::string RunKey::str() const { return question_id + "/" + method + "/run" + std::to_string(run); }

// ------------------------------------------------------------------ ledger

void CallLedger::record(const RunKey& key, CallTag tag) {
  std::lock_guard lock(mu_);
  ++counts_[key][tag];
}

std::size_t CallLedger::total(const RunKey& key) const {
  std::lock_guard lock(mu_);
  auto it = counts_.find(key);
  if (it == counts_.end()) return 0;
  std::size_t n = 0;
  for (const auto& [tag, count] : it->second) n += count;
  return n;
}

std::map<CallTag, std::size_t> CallLedger::by_tag(const RunKey& key) const {
  std::lock_guard lock(mu_);
  auto it = counts_.find(key);
  return it == counts_.end() ? std::map<CallTag, std::size_t>{} : it->second;
}

std::size_t CallLedger::grand_total() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [key, tags] : counts_) {
    for (const auto& [tag, count] : tags) n += count;
  }
  return n;
}

LlmResponse AccountingBackend::complete(const LlmRequest& req) {
  ledger_.record(req.scope, req.tag);
  return inner_.complete(req);
}

// ---------------------------------------------------------------- scripted

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_json(const nlohmann::json& script) {
  auto backend = std::make_unique<ScriptedBackend>();
  auto read_table = [](const nlohmann::json& table, auto&& sink) {
    for (const auto& [tag, responses] : table.items()) {
      const CallTag t = parse_call_tag(tag);
      if (responses.is_string()) {
        sink(t, responses.template get<std::string>());
        continue;
      }
      for (const auto& r : responses) sink(t, r.template get<std::string>());
    }
  };
  if (script.contains("default")) {
    read_table(script["default"], [&](CallTag t, std::string r) { backend->add(t, std::move(r)); });
  }
  if (script.contains("questions")) {
    for (const auto& [qid, table] : script["questions"].items()) {
      read_table(table, [&](CallTag t, std::string r) { backend->add_for_question(qid, t, std::move(r)); });
    }
  }
  return backend;
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open script " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_replay_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open replay log " + path.string());
  struct Entry {
    RunKey scope;
    CallTag tag;
    std::size_t occurrence;
    std::string response;
  };
  std::vector<Entry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    entries.push_back({scope_from_json(j.at("scope")), parse_call_tag(j.at("tag").get<std::string>()),
                       j.at("occurrence").get<std::size_t>(), j.at("response").get<std::string>()});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.scope, a.tag, a.occurrence) < std::tie(b.scope, b.tag, b.occurrence);
  });
  auto backend = std::make_unique<ScriptedBackend>();
  for (auto& e : entries) backend->add_for_scope(e.scope, e.tag, std::move(e.response));
  return backend;
}

void ScriptedBackend::add(CallTag tag, std::string response) {
  std::lock_guard lock(mu_);
  defaults_[tag].push_back(std::move(response));
}

void ScriptedBackend::add_for_question(const std::string& question_id, CallTag tag, std::string response) {
  std::lock_guard lock(mu_);
  per_question_[question_id][tag].push_back(std::move(response));
}

void ScriptedBackend::add_for_scope(const RunKey& scope, CallTag tag, std::string response) {
  std::lock_guard lock(mu_);
  per_scope_[scope][tag].push_back(std::move(response));
}

LlmResponse ScriptedBackend::complete(const LlmRequest& req) {
  ++calls_;
  std::lock_guard lock(mu_);
  const std::size_t occurrence = occurrences_[{req.scope, req.tag}]++;

  auto lookup = [&](const Sequences& table) -> const std::string* {
    auto it = table.find(req.tag);
    if (it == table.end() || occurrence >= it->second.size()) return nullptr;
    return &it->second[occurrence];
  };

  const Sequences* source = nullptr;
  if (auto s = per_scope_.find(req.scope); s != per_scope_.end() && s->second.count(req.tag)) {
    source = &s->second;
  } else if (auto q = per_question_.find(req.scope.question_id); q != per_question_.end() && q->second.count(req.tag)) {
    source = &q->second;
  } else {
    source = &defaults_;
  }
  if (const std::string* text = lookup(*source)) return {*text, std::nullopt, std::chrono::milliseconds{0}};
  throw ScriptExhausted("no scripted response for " + std::string(to_string(req.tag)) + " #" +
                        std::to_string(occurrence) + " in " + req.scope.str());
}

// ------------------------------------------------------------------ replay

LlmResponse ReplayRecorder::complete(const LlmRequest& req) {
  std::size_t occurrence = 0;
  {
    std::lock_guard lock(mu_);
    occurrence = occurrences_[{req.scope, req.tag}]++;
  }
  LlmResponse resp = inner_.complete(req);
  nlohmann::json rec = {
      {"scope", scope_to_json(req.scope)},
      {"tag", std::string(to_string(req.tag))},
      {"occurrence", occurrence},
      {"model", req.model_id},
      {"response", resp.text},
  };
  if (keep_prompts_) {
    auto msgs = nlohmann::json::array();
    for (const auto& m : req.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    rec["messages"] = std::move(msgs);
  }
  std::lock_guard lock(mu_);
  records_.push_back(std::move(rec));
  return resp;
}

std::vector<nlohmann::json> ReplayRecorder::records() const {
  std::vector<nlohmann::json> out;
  {
    std::lock_guard lock(mu_);
    out = records_;
  }
  std::stable_sort(out.begin(), out.end(), [](const nlohmann::json& a, const nlohmann::json& b) {
    const RunKey ka = scope_from_json(a["scope"]);
    const RunKey kb = scope_from_json(b["scope"]);
    const auto ta = a["tag"].get<std::string>();
    const auto tb = b["tag"].get<std::string>();
    const auto oa = a["occurrence"].get<std::size_t>();
    const auto ob = b["occurrence"].get<std::size_t>();
    return std::tie(ka, ta, oa) < std::tie(kb, tb, ob);
  });
  return out;
}

void ReplayRecorder::write_jsonl(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write replay log " + path.string());
  for (const auto& rec : records()) out << rec.dump() << '\n';
}

void ReplayRecorder::load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return;
  std::string line;
  std::lock_guard lock(mu_);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records_.push_back(nlohmann::json::parse(line));
  }
}

void ReplayRecorder::preload(std::vector<nlohmann::json> records) {
  std::lock_guard lock(mu_);
  for (auto& r : records) records_.push_back(std::move(r));
}

// -------------------------------------------------------------- wire format

nlohmann::json chat_request_body(const LlmRequest& req) {
  nlohmann::json body;
  body["model"] = req.model_id;
  auto msgs = nlohmann::json::array();
  for (const auto& m : req.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  body["messages"] = std::move(msgs);
  if (req.temperature) body["temperature"] = *req.temperature;
  if (req.max_tokens) body["max_tokens"] = *req.max_tokens;
  return body;
}

LlmResponse parse_chat_response(const nlohmann::json& body) {
  LlmResponse resp;
  try {
    const auto& choices = body.at("choices");
    if (!choices.is_array() || choices.empty()) throw Error("response has no choices");
    const auto& content = choices.at(0).at("message").at("content");
    resp.text = content.is_null() ? std::string() : content.get<std::string>();
    if (auto u = body.find("usage"); u != body.end() && u->is_object()) {
      resp.usage = TokenUsage{u->value("prompt_tokens", 0), u->value("completion_tokens", 0)};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed chat response: ") + e.what());
  }
  return resp;
}

}  // namespace t2sc
