#pragma once

// Client side of the code sandbox. Jobs and results cross the boundary as
// JSON documents in a per-job scratch directory:
//
//   job.json    {mode, code, entry, inputs|db_path, limits}
//   result.json {outcome, result_text?, truncated?, error?, duration_ms}
//
// A runner is invoked as `<command...> <scratch>/job.json` and writes
// result.json next to the job document.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "t2sc/error.hpp"

namespace t2sc {

struct SandboxLimits {
  std::chrono::milliseconds wall_timeout{300'000};
  std::uint64_t memory_cap = 4ull << 30;
  bool no_network = true;
  std::size_t max_result_bytes = 1u << 20;
};

enum class JobMode { Multi, Single };

struct SandboxJob {
  JobMode mode = JobMode::Multi;
  std::string code;
  std::string entry = "compute_result";
  /// Multi mode: table payloads, one per SQL step, in step order.
  std::vector<std::filesystem::path> inputs;
  /// Single mode: database the code opens itself.
  std::filesystem::path db_path;
  SandboxLimits limits;
};

enum class SandboxOutcome { Ok, ExecError, Timeout, Oom };

std::string_view to_string(SandboxOutcome o);

struct SandboxFault {
  std::string type;
  std::string message;
  std::string traceback;
};

struct SandboxResult {
  SandboxOutcome outcome = SandboxOutcome::ExecError;
  std::string result_text;
  bool truncated = false;
  SandboxFault error;
  std::chrono::milliseconds duration{0};
};

nlohmann::json job_to_json(const SandboxJob& job);
SandboxJob job_from_json(const nlohmann::json& doc);
nlohmann::json result_to_json(const SandboxResult& result);
/// Throws Error when the document is malformed.
SandboxResult result_from_json(const nlohmann::json& doc);

/// Result for failures of the harness itself rather than the user code.
SandboxResult harness_failure(std::string message);

class Sandbox {
 public:
  virtual ~Sandbox() = default;
  /// Runs one job. `scratch` exists, is private to this job and is the only
  /// location the job may write to. Must be safe to call concurrently with
  /// distinct scratch directories.
  virtual SandboxResult run(const SandboxJob& job, const std::filesystem::path& scratch) = 0;
};

/// Spawns `command... <scratch>/job.json` in its own process group with the
/// scratch directory as working directory, an address-space limit, a
/// scrubbed environment and (where permitted) no network namespace. The
/// process group is killed at wall_timeout + grace.
class ProcessSandbox : public Sandbox {
 public:
  explicit ProcessSandbox(std::vector<std::string> command, std::chrono::milliseconds grace = std::chrono::seconds(3));
  SandboxResult run(const SandboxJob& job, const std::filesystem::path& scratch) override;

  /// Environment variables passed through to the runner.
  static const std::vector<std::string>& env_allowlist();

 private:
  std::vector<std::string> command_;
  std::chrono::milliseconds grace_;
};

/// Replays canned result documents. The first rule whose `contains` string
/// occurs in the submitted code wins; otherwise the default result, if any.
class StubSandbox : public Sandbox {
 public:
  /// {"rules": [{"contains": str, "result": result-doc}], "default": result-doc?}
  static std::unique_ptr<StubSandbox> from_json(const nlohmann::json& doc);
  static std::unique_ptr<StubSandbox> from_file(const std::filesystem::path& path);

  void add_rule(std::string contains, SandboxResult result);
  void set_default(SandboxResult result);

  SandboxResult run(const SandboxJob& job, const std::filesystem::path& scratch) override;
  std::size_t jobs() const noexcept { return jobs_.load(); }

 private:
  std::vector<std::pair<std::string, SandboxResult>> rules_;
  std::optional<SandboxResult> default_;
  std::atomic<std::size_t> jobs_{0};
};

/// Delegates to a function; for tests that inspect submitted jobs.
class CallbackSandbox : public Sandbox {
 public:
  using Fn = std::function<SandboxResult(const SandboxJob&, const std::filesystem::path&)>;
  explicit CallbackSandbox(Fn fn) : fn_(std::move(fn)) {}
  SandboxResult run(const SandboxJob& job, const std::filesystem::path& scratch) override {
    ++jobs_;
    return fn_(job, scratch);
  }
  std::size_t jobs() const noexcept { return jobs_.load(); }

 private:
  Fn fn_;
  std::atomic<std::size_t> jobs_{0};
};

}  // namespace t2sc
