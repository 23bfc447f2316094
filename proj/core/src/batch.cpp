#include "t2sc/batch.hpp"

#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "t2sc/database.hpp"
#include "t2sc/trace.hpp"

namespace t2sc {

namespace {

using PairKey = std::pair<std::string, int>;  // question id, run

/// Existing trace lines by question id, for one run file.
std::map<std::string, std::string> read_existing(const std::filesystem::path& path) {
  std::map<std::string, std::string> lines;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto doc = nlohmann::json::parse(line);
      lines[doc.at("question_id").get<std::string>()] = line;
    } catch (const nlohmann::json::exception&) {
      // A torn final line from an interrupted run; the pair is redone.
    }
  }
  return lines;
}

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out << content;
    if (!out) throw Error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::filesystem::path trace_file(const std::filesystem::path& out_dir, const MethodId& method, int run) {
  return out_dir / "traces" / method.label() / ("run" + std::to_string(run) + ".jsonl");
}

BatchResult run_batch(const BatchConfig& cfg) {
  if (!cfg.registry || !cfg.prompts || !cfg.backend) throw Error("batch needs a registry, prompts and a backend");
  if (cfg.runs < 1) throw Error("--runs must be at least 1");
  if (cfg.workers < 1) throw Error("--workers must be at least 1");
  if (cfg.method.needs_sandbox() && !cfg.sandbox) {
    throw Error("method " + cfg.method.str() + " needs a sandbox");
  }
  for (const auto& q : cfg.questions) {
    if (!cfg.registry->contains(q.db_id)) throw Error("question " + q.id + " uses unregistered db '" + q.db_id + "'");
  }
  std::filesystem::create_directories(cfg.out_dir);
  const std::string method_name = cfg.method.str();

  // Resume state.
  std::vector<std::map<std::string, std::string>> existing(static_cast<std::size_t>(cfg.runs));
  std::set<PairKey> done;
  for (int r = 0; r < cfg.runs; ++r) {
    existing[static_cast<std::size_t>(r)] = read_existing(trace_file(cfg.out_dir, cfg.method, r));
    for (const auto& [qid, _] : existing[static_cast<std::size_t>(r)]) done.insert({qid, r});
  }

  ReplayRecorder recorder(*cfg.backend, cfg.keep_prompts);
  const auto replay_path = cfg.out_dir / "replay.jsonl";
  {
    std::vector<nlohmann::json> keep;
    std::ifstream in(replay_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        auto rec = nlohmann::json::parse(line);
        const auto& scope = rec.at("scope");
        const PairKey key{scope.at("question_id").get<std::string>(), scope.at("run").get<int>()};
        // Only calls belonging to finished traces survive a rerun.
        if (scope.at("method").get<std::string>() != method_name || done.count(key)) keep.push_back(std::move(rec));
      } catch (const nlohmann::json::exception&) {
      }
    }
    recorder.preload(std::move(keep));
  }

  CallLedger ledger;
  AccountingBackend accounting(recorder, ledger);

  // Schema contexts are built once per database.
  std::map<std::string, DbSchemaContext> schemas;
  for (const auto& q : cfg.questions) {
    if (schemas.count(q.db_id)) continue;
    const DbEntry& entry = cfg.registry->at(q.db_id);
    const Database db = Database::open_read_only(entry.path);
    schemas.emplace(q.db_id, introspect_schema(db, entry, cfg.introspect));
  }

  struct Item {
    std::size_t question;
    int run;
  };
  std::vector<Item> items;
  BatchResult result;
  for (int r = 0; r < cfg.runs; ++r) {
    for (std::size_t i = 0; i < cfg.questions.size(); ++i) {
      if (done.count({cfg.questions[i].id, r})) {
        ++result.skipped;
      } else {
        items.push_back({i, r});
      }
    }
  }

  std::vector<std::map<std::string, std::string>> fresh(static_cast<std::size_t>(cfg.runs));
  std::vector<std::pair<PairKey, std::string>> failures;
  std::mutex out_mu;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  const auto scratch_root = cfg.out_dir / "scratch";

  auto worker = [&]() {
    // Connections are private to a worker.
    std::map<std::string, Database> connections;
    while (!abort.load()) {
      const std::size_t n = next.fetch_add(1);
      if (n >= items.size()) break;
      const Item item = items[n];
      const Question& q = cfg.questions[item.question];
      try {
        const DbEntry& entry = cfg.registry->at(q.db_id);
        auto conn = connections.find(q.db_id);
        if (conn == connections.end()) {
          conn = connections.emplace(q.db_id, Database::open_read_only(entry.path)).first;
        }
        RunContext ctx{.question = q,
                       .entry = entry,
                       .db = conn->second,
                       .schema = schemas.at(q.db_id),
                       .prompts = *cfg.prompts,
                       .llm = accounting,
                       .ledger = ledger,
                       .sandbox = cfg.sandbox,
                       .key = RunKey{q.id, method_name, item.run},
                       .model_id = cfg.model_id,
                       .temperature = cfg.temperature,
                       .limits = cfg.limits,
                       .match = cfg.match,
                       .scratch_root = scratch_root};

        SeededRandom rng(SeededRandom::derive(cfg.seed, fmt::format("{}/run{}/{}", q.id, item.run, method_name)));
        const auto started = std::chrono::steady_clock::now();
        Trace trace = run_method(cfg.method, ctx, rng);
        if (cfg.record_timings) {
          trace.elapsed =
              std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
        }
        std::string line = trace_to_json(trace).dump();
        std::lock_guard lock(out_mu);
        fresh[static_cast<std::size_t>(item.run)][q.id] = std::move(line);
      } catch (const std::exception& e) {
        if (dynamic_cast<const AuthError*>(&e)) abort = true;
        std::lock_guard lock(out_mu);
        failures.push_back({{q.id, item.run}, e.what()});
      }
    }
  };

  const int width = std::min<int>(cfg.workers, std::max<int>(1, static_cast<int>(items.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < width; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  // Pairs never started because of an abort are failures too.
  std::set<PairKey> attempted;
  for (int r = 0; r < cfg.runs; ++r) {
    for (const auto& [qid, _] : fresh[static_cast<std::size_t>(r)]) attempted.insert({qid, r});
  }
  for (const auto& [key, _] : failures) attempted.insert(key);
  for (const auto& item : items) {
    const PairKey key{cfg.questions[item.question].id, item.run};
    if (!attempted.count(key)) failures.push_back({key, "not attempted after an authentication failure"});
  }

  for (int r = 0; r < cfg.runs; ++r) {
    std::string content;
    const auto& old_lines = existing[static_cast<std::size_t>(r)];
    const auto& new_lines = fresh[static_cast<std::size_t>(r)];
    for (const auto& q : cfg.questions) {
      if (auto it = old_lines.find(q.id); it != old_lines.end()) {
        content += it->second + "\n";
      } else if (auto jt = new_lines.find(q.id); jt != new_lines.end()) {
        content += jt->second + "\n";
      }
    }
    write_atomically(trace_file(cfg.out_dir, cfg.method, r), content);
    result.completed += new_lines.size();
  }
  recorder.write_jsonl(replay_path);

  std::sort(failures.begin(), failures.end());
  result.failed = failures.size();
  const auto manifest = cfg.out_dir / "resume.json";
  if (failures.empty()) {
    std::filesystem::remove(manifest);
  } else {
    auto missing = nlohmann::json::array();
    for (const auto& [key, why] : failures) {
      missing.push_back({{"question_id", key.first}, {"run", key.second}, {"error", why}});
      result.errors.push_back(fmt::format("{} run {}: {}", key.first, key.second, why));
    }
    write_atomically(manifest, nlohmann::json{{"method", method_name}, {"runs", cfg.runs}, {"missing", missing}}
                                   .dump(2) + "\n");
  }
  std::error_code ec;
  std::filesystem::remove_all(scratch_root, ec);
  return result;
}

}  // namespace t2sc
