#pragma once

#include <atomic>
#include <chrono>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "t2sc/error.hpp"

namespace t2sc {

/// Which pipeline step issued a completion.
enum class CallTag { Text2Sql, Decomposer, Text2Python, SingleShot, Knowledge, RepairSql, RepairCode };

std::string_view to_string(CallTag tag);
/// Throws Error for unknown names.
CallTag parse_call_tag(std::string_view name);

/// Identifies one method run on one question; the unit of call accounting.
struct RunKey {
  std::string question_id;
  std::string method;
  int run = 0;

  std::string str() const;
  friend auto operator<=>(const RunKey&, const RunKey&) = default;
};

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
};

struct LlmRequest {
  std::string model_id;
  std::vector<ChatMessage> messages;
  /// Unset means the provider default.
  std::optional<double> temperature;
  std::optional<int> max_tokens;
  CallTag tag = CallTag::Text2Sql;
  RunKey scope;
};

struct TokenUsage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct LlmResponse {
  std::string text;
  std::optional<TokenUsage> usage;
  std::chrono::milliseconds latency{0};
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class AuthError : public Error {
 public:
  using Error::Error;
};

class ScriptExhausted : public Error {
 public:
  using Error::Error;
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  /// Must be safe to call concurrently.
  virtual LlmResponse complete(const LlmRequest& req) = 0;
};

/// Per-run call counts by tag. Internally synchronized.
class CallLedger {
 public:
  void record(const RunKey& key, CallTag tag);
  std::size_t total(const RunKey& key) const;
  std::map<CallTag, std::size_t> by_tag(const RunKey& key) const;
  std::size_t grand_total() const;

 private:
  mutable std::mutex mu_;
  std::map<RunKey, std::map<CallTag, std::size_t>> counts_;
};

/// Counts every complete() invocation, whatever its outcome, then delegates.
class AccountingBackend : public LlmBackend {
 public:
  AccountingBackend(LlmBackend& inner, CallLedger& ledger) : inner_(inner), ledger_(ledger) {}
  LlmResponse complete(const LlmRequest& req) override;

 private:
  LlmBackend& inner_;
  CallLedger& ledger_;
};

/// Deterministic backend replaying canned responses keyed by request tag and
/// per-tag occurrence. Occurrences are counted separately for each RunKey, so
/// concurrent runs never consume each other's responses. Lookup order for a
/// request: exact run scope, then question id, then the default table.
class ScriptedBackend : public LlmBackend {
 public:
  ScriptedBackend() = default;

  /// Script document:
  ///   {"default": {tag: [text, ...]},
  ///    "questions": {question_id: {tag: [text, ...]}}}
  static std::unique_ptr<ScriptedBackend> from_json(const nlohmann::json& script);
  static std::unique_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);
  /// Seeds a backend from a replay log written by ReplayRecorder.
  static std::unique_ptr<ScriptedBackend> from_replay_log(const std::filesystem::path& path);

  void add(CallTag tag, std::string response);
  void add_for_question(const std::string& question_id, CallTag tag, std::string response);
  void add_for_scope(const RunKey& scope, CallTag tag, std::string response);

  LlmResponse complete(const LlmRequest& req) override;

  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  using Sequences = std::map<CallTag, std::vector<std::string>>;

  mutable std::mutex mu_;
  Sequences defaults_;
  std::map<std::string, Sequences> per_question_;
  std::map<RunKey, Sequences> per_scope_;
  std::map<std::pair<RunKey, CallTag>, std::size_t> occurrences_;
  std::atomic<std::size_t> calls_{0};
};

/// Mirrors every request/response pair into an in-memory log that can be
/// written as JSON lines and later replayed.
class ReplayRecorder : public LlmBackend {
 public:
  explicit ReplayRecorder(LlmBackend& inner, bool keep_prompts = true) : inner_(inner), keep_prompts_(keep_prompts) {}
  LlmResponse complete(const LlmRequest& req) override;

  /// Records sorted by (scope, tag, occurrence) so output is independent of
  /// worker scheduling.
  std::vector<nlohmann::json> records() const;
  void write_jsonl(const std::filesystem::path& path) const;
  /// Pre-loads records from an earlier log (resume support).
  void load_jsonl(const std::filesystem::path& path);
  void preload(std::vector<nlohmann::json> records);

 private:
  LlmBackend& inner_;
  bool keep_prompts_;
  mutable std::mutex mu_;
  std::map<std::pair<RunKey, CallTag>, std::size_t> occurrences_;
  std::vector<nlohmann::json> records_;
};

struct HttpBackendConfig {
  /// e.g. "https://api.example.com/v1"; requests go to {base}/chat/completions.
  std::string api_base;
  std::string api_key;
  int transport_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds request_timeout{600};
  /// 0 disables rate limiting.
  double requests_per_minute = 0;

  /// Reads LLM_API_BASE and LLM_API_KEY.
  static HttpBackendConfig from_env();
};

/// Chat-completions client: POST {model, messages, temperature?, max_tokens?},
/// answer read from choices[0].message.content.
class HttpBackend : public LlmBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  ~HttpBackend() override;
  LlmResponse complete(const LlmRequest& req) override;

  /// Transport-level retries performed so far; these are not LLM calls.
  std::size_t transport_retries() const noexcept { return transport_retries_.load(); }

 private:
  void wait_for_rate_limit();

  HttpBackendConfig config_;
  std::string scheme_host_;
  std::string path_prefix_;
  std::atomic<std::size_t> transport_retries_{0};
  std::mutex rate_mu_;
  std::chrono::steady_clock::time_point next_slot_{};
};

/// Request body in the chat-completions wire format.
nlohmann::json chat_request_body(const LlmRequest& req);
/// Extracts choices[0].message.content and usage. Throws Error when malformed.
LlmResponse parse_chat_response(const nlohmann::json& body);

}  // namespace t2sc
