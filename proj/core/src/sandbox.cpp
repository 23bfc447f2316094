#include "t2sc/sandbox.hpp"

#include <fcntl.h>
#include <sched.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

extern char** environ;

namespace t2sc {

namespace {

constexpr std::array<std::pair<SandboxOutcome, std::string_view>, 4> kOutcomeNames = {{
    {SandboxOutcome::Ok, "ok"},
    {SandboxOutcome::ExecError, "exec_error"},
    {SandboxOutcome::Timeout, "timeout"},
    {SandboxOutcome::Oom, "oom"},
}};

SandboxOutcome parse_outcome(std::string_view name) {
  for (const auto& [o, n] : kOutcomeNames) {
    if (n == name) return o;
  }
  throw Error("unknown sandbox outcome '" + std::string(name) + "'");
}

void cap_result(SandboxResult& r, std::size_t max_bytes) {
  if (r.result_text.size() > max_bytes) {
    r.result_text.resize(max_bytes);
    r.truncated = true;
  }
}

std::string tail_of_file(const std::filesystem::path& path, std::size_t max_bytes = 4000) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string s = ss.str();
  if (s.size() > max_bytes) s = s.substr(s.size() - max_bytes);
  return s;
}

/// PATH lookup done before fork so the child only calls execve.
std::string resolve_executable(const std::string& name) {
  if (name.find('/') != std::string::npos) return name;
  const char* path = std::getenv("PATH");
  std::string_view dirs = path ? path : "/usr/bin:/bin";
  while (!dirs.empty()) {
    const auto colon = dirs.find(':');
    const std::string dir(dirs.substr(0, colon));
    const std::string candidate = (dir.empty() ? std::string(".") : dir) + "/" + name;
    if (::access(candidate.c_str(), X_OK) == 0) return candidate;
    if (colon == std::string_view::npos) break;
    dirs.remove_prefix(colon + 1);
  }
  return name;
}

}  // namespace

std::string_view to_string(SandboxOutcome o) {
  for (const auto& [out, name] : kOutcomeNames) {
    if (out == o) return name;
  }
  return "unknown";
}

// ---------------------------------------------------------------- documents

nlohmann::json job_to_json(const SandboxJob& job) {
  nlohmann::json doc;
  doc["mode"] = job.mode == JobMode::Multi ? "multi" : "single";
  doc["code"] = job.code;
  doc["entry"] = job.entry;
  if (job.mode == JobMode::Multi) {
    auto inputs = nlohmann::json::array();
    for (const auto& p : job.inputs) inputs.push_back(p.string());
    doc["inputs"] = std::move(inputs);
  } else {
    doc["db_path"] = job.db_path.string();
  }
  doc["limits"] = {
      {"wall_timeout_ms", job.limits.wall_timeout.count()},
      {"memory_cap_bytes", job.limits.memory_cap},
      {"no_network", job.limits.no_network},
      {"max_result_bytes", job.limits.max_result_bytes},
  };
  return doc;
}

SandboxJob job_from_json(const nlohmann::json& doc) {
  SandboxJob job;
  try {
    const auto mode = doc.at("mode").get<std::string>();
    if (mode == "multi") {
      job.mode = JobMode::Multi;
      for (const auto& p : doc.at("inputs")) job.inputs.emplace_back(p.get<std::string>());
    } else if (mode == "single") {
      job.mode = JobMode::Single;
      job.db_path = doc.at("db_path").get<std::string>();
    } else {
      throw Error("unknown job mode '" + mode + "'");
    }
    job.code = doc.at("code").get<std::string>();
    job.entry = doc.value("entry", std::string("compute_result"));
    if (auto l = doc.find("limits"); l != doc.end()) {
      job.limits.wall_timeout = std::chrono::milliseconds(l->value("wall_timeout_ms", job.limits.wall_timeout.count()));
      job.limits.memory_cap = l->value("memory_cap_bytes", job.limits.memory_cap);
      job.limits.no_network = l->value("no_network", true);
      job.limits.max_result_bytes = l->value("max_result_bytes", job.limits.max_result_bytes);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed job document: ") + e.what());
  }
  return job;
}

nlohmann::json result_to_json(const SandboxResult& r) {
  nlohmann::json doc;
  doc["outcome"] = std::string(to_string(r.outcome));
  if (r.outcome == SandboxOutcome::Ok) {
    doc["result_text"] = r.result_text;
    if (r.truncated) doc["truncated"] = true;
  } else {
    doc["error"] = {{"type", r.error.type}, {"message", r.error.message}, {"traceback", r.error.traceback}};
  }
  doc["duration_ms"] = r.duration.count();
  return doc;
}

SandboxResult result_from_json(const nlohmann::json& doc) {
  SandboxResult r;
  try {
    r.outcome = parse_outcome(doc.at("outcome").get<std::string>());
    if (auto t = doc.find("result_text"); t != doc.end() && !t->is_null()) {
      r.result_text = t->is_string() ? t->get<std::string>() : t->dump();
    }
    r.truncated = doc.value("truncated", false);
    if (auto e = doc.find("error"); e != doc.end() && e->is_object()) {
      r.error.type = e->value("type", std::string());
      r.error.message = e->value("message", std::string());
      r.error.traceback = e->value("traceback", std::string());
    }
    r.duration = std::chrono::milliseconds(doc.value("duration_ms", std::int64_t{0}));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed result document: ") + e.what());
  }
  return r;
}

SandboxResult harness_failure(std::string message) {
  SandboxResult r;
  r.outcome = SandboxOutcome::ExecError;
  r.error.type = "harness";
  r.error.message = std::move(message);
  return r;
}

// ------------------------------------------------------------------ process

ProcessSandbox::ProcessSandbox(std::vector<std::string> command, std::chrono::milliseconds grace)
    : command_(std::move(command)), grace_(grace) {
  if (command_.empty()) throw Error("sandbox runner command is empty");
}

const std::vector<std::string>& ProcessSandbox::env_allowlist() {
  static const std::vector<std::string> names = {"PATH", "LANG", "LC_ALL", "PYTHONPATH", "VIRTUAL_ENV"};
  return names;
}

SandboxResult ProcessSandbox::run(const SandboxJob& job, const std::filesystem::path& scratch) {
  if (job.limits.wall_timeout.count() <= 0 || job.limits.memory_cap == 0) {
    return harness_failure("sandbox limits must be positive");
  }
  const auto job_path = scratch / "job.json";
  const auto result_path = scratch / "result.json";
  const auto log_path = scratch / "runner.log";
  {
    std::ofstream out(job_path, std::ios::trunc);
    out << job_to_json(job).dump();
    if (!out) return harness_failure("cannot write " + job_path.string());
  }
  std::filesystem::remove(result_path);

  // Everything the child needs is prepared before fork.
  const std::string exe = resolve_executable(command_.front());
  std::vector<std::string> args = command_;
  args.push_back(job_path.string());
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  std::vector<std::string> env;
  for (const auto& name : env_allowlist()) {
    if (const char* v = std::getenv(name.c_str())) env.push_back(name + "=" + v);
  }
  env.push_back("HOME=" + scratch.string());
  env.push_back("TMPDIR=" + scratch.string());
  std::vector<char*> envp;
  for (auto& e : env) envp.push_back(e.data());
  envp.push_back(nullptr);

  const std::string scratch_str = scratch.string();
  const std::string log_str = log_path.string();
  const rlim_t mem = static_cast<rlim_t>(job.limits.memory_cap);
  const bool no_network = job.limits.no_network;

  const auto started = std::chrono::steady_clock::now();
  const pid_t pid = ::fork();
  if (pid < 0) return harness_failure(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::setpgid(0, 0);
    // A bare network namespace keeps our credentials; a user namespace would
    // drop capabilities the runner may need to reach its own files.
    if (no_network && ::unshare(CLONE_NEWNET) != 0) ::unshare(CLONE_NEWUSER | CLONE_NEWNET);
    if (::chdir(scratch_str.c_str()) != 0) ::_exit(126);
    const rlimit lim{mem, mem};
    ::setrlimit(RLIMIT_AS, &lim);
    const int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    const int log = ::open(log_str.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    if (log >= 0) {
      ::dup2(log, STDOUT_FILENO);
      ::dup2(log, STDERR_FILENO);
    }
    ::execve(exe.c_str(), argv.data(), envp.data());
    ::_exit(127);
  }
  ::setpgid(pid, pid);

  const auto deadline = started + job.limits.wall_timeout + grace_;
  int status = 0;
  bool killed = false;
  while (true) {
    const pid_t w = ::waitpid(pid, &status, WNOHANG);
    if (w == pid) break;
    if (w < 0 && errno != EINTR) return harness_failure(std::string("waitpid failed: ") + std::strerror(errno));
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(-pid, SIGKILL);
      while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
      }
      killed = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  // Reap anything the runner left behind in its group.
  ::kill(-pid, SIGKILL);
  const auto elapsed =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);

  if (killed) {
    SandboxResult r;
    r.outcome = SandboxOutcome::Timeout;
    r.error.type = "timeout";
    r.error.message = "killed after exceeding the wall-clock limit";
    r.duration = elapsed;
    return r;
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    std::string why = WIFSIGNALED(status) ? "runner killed by signal " + std::to_string(WTERMSIG(status))
                                          : "runner exited with status " + std::to_string(WEXITSTATUS(status));
    auto r = harness_failure(why);
    r.error.traceback = tail_of_file(log_path);
    r.duration = elapsed;
    return r;
  }
  std::ifstream in(result_path);
  if (!in) {
    auto r = harness_failure("runner wrote no result document");
    r.error.traceback = tail_of_file(log_path);
    r.duration = elapsed;
    return r;
  }
  try {
    SandboxResult r = result_from_json(nlohmann::json::parse(in));
    if (r.duration.count() == 0) r.duration = elapsed;
    cap_result(r, job.limits.max_result_bytes);
    return r;
  } catch (const std::exception& e) {
    return harness_failure(e.what());
  }
}

// --------------------------------------------------------------------- stub

std::unique_ptr<StubSandbox> StubSandbox::from_json(const nlohmann::json& doc) {
  auto stub = std::make_unique<StubSandbox>();
  try {
    if (auto rules = doc.find("rules"); rules != doc.end()) {
      for (const auto& rule : *rules) {
        stub->add_rule(rule.at("contains").get<std::string>(), result_from_json(rule.at("result")));
      }
    }
    if (auto def = doc.find("default"); def != doc.end() && !def->is_null()) stub->set_default(result_from_json(*def));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed stub sandbox document: ") + e.what());
  }
  return stub;
}

std::unique_ptr<StubSandbox> StubSandbox::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open stub sandbox file " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void StubSandbox::add_rule(std::string contains, SandboxResult result) {
  rules_.emplace_back(std::move(contains), std::move(result));
}

void StubSandbox::set_default(SandboxResult result) { default_ = std::move(result); }

SandboxResult StubSandbox::run(const SandboxJob& job, const std::filesystem::path&) {
  ++jobs_;
  SandboxResult r;
  bool found = false;
  for (const auto& [needle, result] : rules_) {
    if (job.code.find(needle) != std::string::npos) {
      r = result;
      found = true;
      break;
    }
  }
  if (!found) {
    if (!default_) return harness_failure("no canned result matches the submitted code");
    r = *default_;
  }
  cap_result(r, job.limits.max_result_bytes);
  return r;
}

}  // namespace t2sc
