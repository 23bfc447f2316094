#include "t2sc/code_executor.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>

#include <fmt/format.h>

#include "t2sc/prompting.hpp"
#include "t2sc/run_context.hpp"

namespace t2sc {

namespace {

std::string last_lines(const std::string& text, std::size_t n) {
  std::size_t pos = text.size();
  // Ignore one trailing newline so it does not count as an empty line.
  if (pos > 0 && text[pos - 1] == '\n') --pos;
  std::size_t end = pos;
  for (std::size_t seen = 0; pos > 0; --pos) {
    if (text[pos - 1] == '\n' && ++seen == n) break;
  }
  return text.substr(pos, end - pos);
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  }
  return s;
}

/// Creates a fresh, empty scratch directory for one sandbox job.
std::filesystem::path make_scratch(const RunContext& ctx, std::size_t attempt) {
  static std::atomic<std::uint64_t> counter{0};
  const auto root = ctx.scratch_root.empty() ? std::filesystem::temp_directory_path() / "t2sc-scratch"
                                             : ctx.scratch_root;
  const auto dir = root / fmt::format("{}-{}-run{}-a{}-{}", sanitize(ctx.key.question_id),
                                      sanitize(ctx.key.method), ctx.key.run, attempt, counter++);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

std::size_t CodeExecution::sandbox_runs() const {
  return static_cast<std::size_t>(
      std::count_if(attempts.begin(), attempts.end(), [](const CodeAttempt& a) { return a.result.has_value(); }));
}

std::string repair_error_text(const SandboxResult& r) {
  switch (r.outcome) {
    case SandboxOutcome::Ok:
      return {};
    case SandboxOutcome::Timeout:
      return "the code did not finish within the time limit; make it more efficient";
    case SandboxOutcome::Oom:
      return "the code exceeded the memory limit; reduce memory use";
    case SandboxOutcome::ExecError:
      break;
  }
  std::string out = r.error.type.empty() ? std::string("Error") : r.error.type;
  if (!r.error.message.empty()) out += ": " + r.error.message;
  const std::string tb = last_lines(r.error.traceback, 20);
  if (!tb.empty()) out += "\n" + tb;
  return out;
}

std::string format_reminder(std::string_view reason) {
  return fmt::format("the returned value could not be read as a list of tuples ({}). {}", reason,
                     kOutputFormatInstruction);
}

CodeExecution run_code_with_repair(const RunContext& ctx, const std::vector<ResultTable>* tables,
                                   std::string_view decomposition) {
  CodeExecution exec;
  if (!ctx.sandbox) throw Error("code execution requested but no sandbox is configured");
  const bool multi = tables != nullptr;
  const int budget = 1 + std::max(0, ctx.limits.max_repairs);

  PromptExtras base;
  base.format_rules = ctx.entry.format_rules;
  if (multi) {
    base.decomposition = std::string(decomposition);
    base.shapes = render_shapes(*tables, 3, ctx.schema.null_literal);
  }

  std::string previous;
  std::string error;
  for (int attempt = 0; attempt < budget; ++attempt) {
    PromptExtras extras = base;
    std::string response;
    if (attempt == 0) {
      response = multi ? ctx.ask(PromptKind::Text2Python, CallTag::Text2Python, extras)
                       : ctx.ask(PromptKind::SingleShot, CallTag::SingleShot, extras);
    } else {
      extras.artifact = previous;
      extras.error = error;
      response = ctx.ask(PromptKind::RepairCode, CallTag::RepairCode, extras);
    }

    CodeAttempt a;
    try {
      a.code = extract_fenced(response, "python");
    } catch (const NoBlockFound& e) {
      a.error = std::string(e.what()) + "; wrap the code in a ```python block";
      previous = response;
      error = a.error;
      exec.attempts.push_back(std::move(a));
      continue;
    }

    const auto scratch = make_scratch(ctx, static_cast<std::size_t>(attempt));
    SandboxJob job;
    job.code = a.code;
    job.limits = ctx.limits.sandbox;
    if (multi) {
      job.mode = JobMode::Multi;
      for (std::size_t i = 0; i < tables->size(); ++i) {
        const auto path = scratch / fmt::format("df{}.json", i);
        serialize_table((*tables)[i], path);
        job.inputs.push_back(path);
      }
    } else {
      job.mode = JobMode::Single;
      job.db_path = std::filesystem::absolute(ctx.entry.path);
    }
    a.result = ctx.sandbox->run(job, scratch);
    std::error_code ec;
    std::filesystem::remove_all(scratch, ec);

    if (a.result->outcome == SandboxOutcome::Ok) {
      try {
        exec.final = canonicalize_answer(a.result->result_text);
      } catch (const ParseError& e) {
        a.error = format_reminder(e.reason());
      }
    } else {
      a.error = repair_error_text(*a.result);
    }
    previous = a.code;
    error = a.error;
    exec.attempts.push_back(std::move(a));
    if (exec.final) break;
  }
  return exec;
}

std::string RunContext::ask(PromptKind kind, CallTag tag, const PromptExtras& extras) const {
  LlmRequest req;
  req.model_id = model_id;
  req.messages.push_back({"user", prompts.render(kind, schema, question, extras)});
  req.temperature = temperature;
  req.tag = tag;
  req.scope = key;
  return llm.complete(req).text;
}

}  // namespace t2sc
