#include <atomic>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "t2sc/llm_backend.hpp"
#include "test_support.hpp"

using namespace t2sc;
using namespace t2sc::testing;

namespace {

LlmRequest request(CallTag tag, const RunKey& scope = {"q1", "text2sql", 0}) {
  LlmRequest r;
  r.model_id = "m";
  r.messages = {{"user", "hi"}};
  r.tag = tag;
  r.scope = scope;
  return r;
}

// Chat-completions stand-in on a loopback port.
class FakeServer {
 public:
  explicit FakeServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat/completions", [this, handler](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      handler(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  std::string base() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int hits() const { return hits_.load(); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> hits_{0};
};

std::string reply_body(const std::string& text) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}},
                        {"usage", {{"prompt_tokens", 3}, {"completion_tokens", 4}}}}
      .dump();
}

HttpBackendConfig fast_config(const std::string& base) {
  HttpBackendConfig cfg;
  cfg.api_base = base;
  cfg.api_key = "secret";
  cfg.initial_backoff = std::chrono::milliseconds(1);
  cfg.request_timeout = std::chrono::seconds(5);
  return cfg;
}

}  // namespace

TEST(CallTag, NamesRoundTrip) {
  for (CallTag t : {CallTag::Text2Sql, CallTag::Decomposer, CallTag::Text2Python, CallTag::SingleShot,
                    CallTag::Knowledge, CallTag::RepairSql, CallTag::RepairCode}) {
    EXPECT_EQ(parse_call_tag(to_string(t)), t);
  }
  EXPECT_EQ(to_string(CallTag::RepairSql), "repair_sql");
  EXPECT_THROW(parse_call_tag("bogus"), Error);
}

TEST(ScriptedBackend, ReplaysInOrder) {
  ScriptedBackend b;
  b.add(CallTag::Text2Sql, "r1");
  b.add(CallTag::Text2Sql, "r2");
  CallLedger ledger;
  AccountingBackend acc(b, ledger);
  EXPECT_EQ(acc.complete(request(CallTag::Text2Sql)).text, "r1");
  EXPECT_EQ(acc.complete(request(CallTag::Text2Sql)).text, "r2");
  EXPECT_EQ(ledger.total({"q1", "text2sql", 0}), 2u);
  EXPECT_THROW(acc.complete(request(CallTag::Text2Sql)), ScriptExhausted);
  // The failed call still counts.
  EXPECT_EQ(ledger.total({"q1", "text2sql", 0}), 3u);
}

TEST(ScriptedBackend, MissingTagExhausted) {
  ScriptedBackend b;
  EXPECT_THROW(b.complete(request(CallTag::Knowledge)), ScriptExhausted);
}

TEST(ScriptedBackend, OccurrencesArePerScope) {
  ScriptedBackend b;
  b.add_for_question("q1", CallTag::Text2Sql, "first");
  b.add_for_question("q1", CallTag::Text2Sql, "second");
  EXPECT_EQ(b.complete(request(CallTag::Text2Sql, {"q1", "m", 0})).text, "first");
  EXPECT_EQ(b.complete(request(CallTag::Text2Sql, {"q1", "m", 1})).text, "first");
  EXPECT_EQ(b.complete(request(CallTag::Text2Sql, {"q1", "m", 0})).text, "second");
}

TEST(ScriptedBackend, LookupPrecedence) {
  ScriptedBackend b;
  b.add(CallTag::Text2Sql, "default");
  b.add_for_question("q1", CallTag::Text2Sql, "question");
  b.add_for_scope({"q1", "m", 2}, CallTag::Text2Sql, "scope");
  EXPECT_EQ(b.complete(request(CallTag::Text2Sql, {"q1", "m", 2})).text, "scope");
  EXPECT_EQ(b.complete(request(CallTag::Text2Sql, {"q1", "m", 0})).text, "question");
  EXPECT_EQ(b.complete(request(CallTag::Text2Sql, {"q9", "m", 0})).text, "default");
}

TEST(ScriptedBackend, ConcurrentCallersSeeOwnSequences) {
  ScriptedBackend b;
  for (int i = 0; i < 200; ++i) {
    b.add(CallTag::Text2Sql, "sql" + std::to_string(i));
    b.add(CallTag::Decomposer, "dec" + std::to_string(i));
  }
  std::vector<std::string> a, c;
  std::thread t1([&] {
    for (int i = 0; i < 200; ++i) a.push_back(b.complete(request(CallTag::Text2Sql)).text);
  });
  std::thread t2([&] {
    for (int i = 0; i < 200; ++i) c.push_back(b.complete(request(CallTag::Decomposer)).text);
  });
  t1.join();
  t2.join();
  for (int i = 0; i < 200; ++i) {
    EXPECT_EQ(a[i], "sql" + std::to_string(i));
    EXPECT_EQ(c[i], "dec" + std::to_string(i));
  }
  EXPECT_EQ(b.calls(), 400u);
}

TEST(ScriptedBackend, FromJson) {
  const auto b = ScriptedBackend::from_json(nlohmann::json::parse(
      R"({"default": {"text2sql": "```sql SELECT 1```"}, "questions": {"q2": {"knowledge": ["[(1,)]", "[(2,)]"]}}})"));
  EXPECT_EQ(b->complete(request(CallTag::Text2Sql)).text, "```sql SELECT 1```");
  EXPECT_EQ(b->complete(request(CallTag::Knowledge, {"q2", "knowledge", 0})).text, "[(1,)]");
  EXPECT_THROW(ScriptedBackend::from_json(nlohmann::json::parse(R"({"default": {"nope": "x"}})")), Error);
}

TEST(CallLedger, TotalsAndTags) {
  CallLedger l;
  const RunKey k{"q", "m", 0};
  l.record(k, CallTag::Text2Sql);
  l.record(k, CallTag::RepairSql);
  l.record(k, CallTag::RepairSql);
  l.record({"q", "m", 1}, CallTag::Text2Sql);
  EXPECT_EQ(l.total(k), 3u);
  EXPECT_EQ(l.by_tag(k).at(CallTag::RepairSql), 2u);
  EXPECT_EQ(l.grand_total(), 4u);
  EXPECT_EQ(l.total({"other", "m", 0}), 0u);
}

TEST(ReplayRecorder, LogSeedsScriptedBackend) {
  TempDir dir;
  ScriptedBackend inner;
  inner.add(CallTag::Text2Sql, "a");
  inner.add(CallTag::Text2Sql, "b");
  inner.add(CallTag::Decomposer, "d");
  ReplayRecorder rec(inner);
  rec.complete(request(CallTag::Text2Sql, {"q2", "m", 0}));
  rec.complete(request(CallTag::Decomposer, {"q1", "m", 0}));
  rec.complete(request(CallTag::Text2Sql, {"q2", "m", 0}));
  rec.write_jsonl(dir / "replay.jsonl");

  const auto records = rec.records();
  ASSERT_EQ(records.size(), 3u);
  EXPECT_EQ(records[0]["scope"]["question_id"], "q1");
  EXPECT_TRUE(records[0].contains("messages"));

  const auto replay = ScriptedBackend::from_replay_log(dir / "replay.jsonl");
  EXPECT_EQ(replay->complete(request(CallTag::Text2Sql, {"q2", "m", 0})).text, "a");
  EXPECT_EQ(replay->complete(request(CallTag::Text2Sql, {"q2", "m", 0})).text, "b");
  EXPECT_EQ(replay->complete(request(CallTag::Decomposer, {"q1", "m", 0})).text, "d");
  EXPECT_THROW(replay->complete(request(CallTag::Decomposer, {"q1", "m", 0})), ScriptExhausted);
}

TEST(ReplayRecorder, CanDropPrompts) {
  ScriptedBackend inner;
  inner.add(CallTag::Knowledge, "x");
  ReplayRecorder rec(inner, false);
  rec.complete(request(CallTag::Knowledge));
  EXPECT_FALSE(rec.records().at(0).contains("messages"));
}

TEST(WireFormat, RequestBody) {
  LlmRequest r = request(CallTag::Text2Sql);
  auto body = chat_request_body(r);
  EXPECT_EQ(body["model"], "m");
  EXPECT_EQ(body["messages"][0]["role"], "user");
  // Unset temperature means the provider default.
  EXPECT_FALSE(body.contains("temperature"));
  EXPECT_FALSE(body.contains("max_tokens"));
  r.temperature = 0.2;
  r.max_tokens = 100;
  body = chat_request_body(r);
  EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.2);
  EXPECT_EQ(body["max_tokens"], 100);
}

TEST(WireFormat, ResponseParsing) {
  const auto r = parse_chat_response(nlohmann::json::parse(reply_body("hello")));
  EXPECT_EQ(r.text, "hello");
  ASSERT_TRUE(r.usage);
  EXPECT_EQ(r.usage->completion_tokens, 4);
  EXPECT_THROW(parse_chat_response(nlohmann::json::parse(R"({"choices": []})")), Error);
}

TEST(HttpBackend, CompletesAgainstLocalServer) {
  std::string seen_auth, seen_body;
  FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    seen_body = req.body;
    res.set_content(reply_body("```sql SELECT 1```"), "application/json");
  });
  HttpBackend b(fast_config(server.base()));
  const auto r = b.complete(request(CallTag::Text2Sql));
  EXPECT_EQ(r.text, "```sql SELECT 1```");
  EXPECT_EQ(seen_auth, "Bearer secret");
  EXPECT_EQ(nlohmann::json::parse(seen_body)["messages"][0]["content"], "hi");
  EXPECT_EQ(b.transport_retries(), 0u);
}

TEST(HttpBackend, RetriesServerErrorsWithoutCountingCalls) {
  std::atomic<int> n{0};
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    if (n++ < 2) {
      res.status = 503;
      return;
    }
    res.set_content(reply_body("ok"), "application/json");
  });
  HttpBackend inner(fast_config(server.base()));
  CallLedger ledger;
  AccountingBackend b(inner, ledger);
  EXPECT_EQ(b.complete(request(CallTag::Knowledge)).text, "ok");
  EXPECT_EQ(inner.transport_retries(), 2u);
  EXPECT_EQ(ledger.grand_total(), 1u);
  EXPECT_EQ(server.hits(), 3);
}

TEST(HttpBackend, GivesUpAfterRetryBudget) {
  FakeServer server([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  HttpBackend b(fast_config(server.base()));
  EXPECT_THROW(b.complete(request(CallTag::Knowledge)), TransportError);
  EXPECT_EQ(server.hits(), 4);
}

TEST(HttpBackend, AuthErrorIsImmediate) {
  FakeServer server([](const httplib::Request&, httplib::Response& res) { res.status = 401; });
  HttpBackend b(fast_config(server.base()));
  EXPECT_THROW(b.complete(request(CallTag::Knowledge)), AuthError);
  EXPECT_EQ(server.hits(), 1);
}

TEST(HttpBackend, ConfigValidation) {
  EXPECT_THROW(HttpBackend(HttpBackendConfig{}), Error);
  HttpBackendConfig cfg;
  cfg.api_base = "no-scheme";
  EXPECT_THROW(HttpBackend{cfg}, Error);
}

TEST(Offline, ScriptedRunNeverTouchesNetwork) {
  FakeServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content(reply_body("[(1,)]"), "application/json");
  });
  setenv("LLM_API_BASE", server.base().c_str(), 1);
  setenv("LLM_API_KEY", "secret", 1);
  TempDir dir;
  const auto r = run_command({cli_path().string(), "run", "--dataset", (mini_dir() / "dataset.jsonl").string(),
                              "--db-registry", mini_registry().string(), "--method", "t2sc-multi", "--runs", "1",
                              "--backend", "scripted:" + (mini_dir() / "script_t2sc_multi.json").string(),
                              "--sandbox", "stub:" + (mini_dir() / "stub_sandbox.json").string(), "--templates",
                              templates_dir().string(), "--exemplars", exemplars_dir().string(), "--out",
                              (dir / "out").string()});
  unsetenv("LLM_API_BASE");
  unsetenv("LLM_API_KEY");
  EXPECT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(server.hits(), 0);
}
