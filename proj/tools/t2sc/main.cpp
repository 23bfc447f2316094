// t2sc: run question-answering methods over a dataset and score the traces.
//
// Exit codes: 0 success, 2 configuration or input error, 3 partial run
// (see <out>/resume.json; rerun the same command to resume).

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "t2sc/batch.hpp"
#include "t2sc/evaluator.hpp"
#include "t2sc/llm_backend.hpp"
#include "t2sc/pipelines.hpp"
#include "t2sc/prompting.hpp"
#include "t2sc/sandbox.hpp"
#include "t2sc/trace.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

std::unique_ptr<t2sc::LlmBackend> make_backend(const std::string& spec) {
  if (spec == "http") return std::make_unique<t2sc::HttpBackend>(t2sc::HttpBackendConfig::from_env());
  if (spec.starts_with("scripted:")) return t2sc::ScriptedBackend::from_file(spec.substr(9));
  if (spec.starts_with("replay:")) return t2sc::ScriptedBackend::from_replay_log(spec.substr(7));
  throw t2sc::Error("unknown backend '" + spec + "' (expected http, scripted:PATH or replay:PATH)");
}

std::unique_ptr<t2sc::Sandbox> make_sandbox(const std::string& spec) {
  if (spec.empty() || spec == "none") return nullptr;
  if (spec.starts_with("stub:")) return t2sc::StubSandbox::from_file(spec.substr(5));
  if (spec.starts_with("process:")) {
    std::istringstream words(spec.substr(8));
    std::vector<std::string> argv;
    for (std::string w; words >> w;) argv.push_back(w);
    return std::make_unique<t2sc::ProcessSandbox>(std::move(argv));
  }
  throw t2sc::Error("unknown sandbox '" + spec + "' (expected none, stub:PATH or process:COMMAND)");
}

std::vector<t2sc::TraceRecord> load_all(const std::vector<std::string>& paths) {
  std::vector<t2sc::TraceRecord> out;
  for (const auto& p : paths) {
    if (!std::filesystem::exists(p)) throw t2sc::Error("no such trace path: " + p);
    auto recs = t2sc::load_trace_records(p);
    out.insert(out.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw t2sc::Error("cannot write " + path.string());
  out << text;
}

struct MatchFlags {
  double epsilon = 0;
  bool dedupe = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--epsilon", epsilon, "Relative tolerance for numbers (0 = exact)")->check(CLI::NonNegativeNumber);
    cmd->add_flag("--dedupe", dedupe, "Set semantics instead of multiset semantics");
  }
  t2sc::MatchConfig config() const {
    t2sc::MatchConfig cfg;
    if (epsilon > 0) {
      cfg.numeric_mode = t2sc::NumericMode::Epsilon;
      cfg.relative_tolerance = epsilon;
    }
    cfg.dedupe = dedupe;
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-to-SQL and code pipelines: run methods, score traces, analyse routing"};
  app.require_subcommand(1);

  // ---------------------------------------------------------------- run
  auto* run = app.add_subcommand("run", "Run one method over a dataset");
  std::string dataset_path, registry_path, method_text, out_dir, backend_spec, sandbox_spec = "none";
  std::string template_dir = T2SC_DEFAULT_TEMPLATES, exemplar_dir = T2SC_DEFAULT_EXEMPLARS, model_id = "default";
  int runs = 3, workers = 1, max_repairs = 3;
  std::uint64_t seed = 0;
  double sql_timeout = 120, code_timeout = 300;
  std::optional<double> temperature;
  bool timings = false, no_prompts = false;
  MatchFlags run_match;
  run->add_option("--dataset", dataset_path, "Question file (JSONL)")->required();
  run->add_option("--db-registry", registry_path, "Database registry (JSON)")->required();
  run->add_option("--method", method_text,
                  "knowledge | text2sql | sc:K | t2sc-single | t2sc-multi | hybrid-single | hybrid-multi")
      ->required();
  run->add_option("--runs", runs, "Independent runs per question")->capture_default_str();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--seed", seed, "Master seed")->capture_default_str();
  run->add_option("--workers", workers, "Parallel questions")->capture_default_str();
  run->add_option("--backend", backend_spec, "http | scripted:PATH | replay:PATH")->required();
  run->add_option("--sandbox", sandbox_spec, "none | stub:PATH | process:COMMAND")->capture_default_str();
  run->add_option("--sql-timeout", sql_timeout, "Seconds per SQL statement")->capture_default_str();
  run->add_option("--code-timeout", code_timeout, "Seconds per sandbox job")->capture_default_str();
  run->add_option("--max-repairs", max_repairs, "Repair attempts after the first try")->capture_default_str();
  run->add_option("--templates", template_dir, "Prompt template directory")->capture_default_str();
  run->add_option("--exemplars", exemplar_dir, "Few-shot exemplar directory")->capture_default_str();
  run->add_option("--model", model_id, "Model identifier sent to the backend")->capture_default_str();
  run->add_option("--temperature", temperature, "Sampling temperature (provider default when unset)");
  run->add_flag("--timings", timings, "Record wall-clock durations in traces");
  run->add_flag("--no-prompts", no_prompts, "Leave rendered prompts out of the replay log");
  run_match.add(run);

  // --------------------------------------------------------------- eval
  auto* eval = app.add_subcommand("eval", "Score trace files against gold answers");
  std::string eval_dataset, eval_out, eval_format = "markdown";
  std::vector<std::string> eval_traces;
  bool eval_categories = false;
  MatchFlags eval_match;
  eval->add_option("--dataset", eval_dataset, "Question file (JSONL)")->required();
  eval->add_option("--traces", eval_traces, "Trace files or directories")->required();
  eval->add_option("--out", eval_out, "Write report.json and report.md here");
  eval->add_option("--format", eval_format, "markdown | json (stdout)")
      ->check(CLI::IsMember({"markdown", "json"}))
      ->capture_default_str();
  eval->add_flag("--categories", eval_categories, "Also print per-category accuracy");
  eval_match.add(eval);

  // ------------------------------------------------------------ routing
  auto* routing = app.add_subcommand("routing", "Share of questions routed to the code sandbox");
  std::string routing_dataset, routing_reference, routing_out, routing_format = "markdown";
  std::vector<std::string> routing_t2sc;
  int reference_run = 0;
  MatchFlags routing_match;
  routing->add_option("--dataset", routing_dataset, "Question file (JSONL)")->required();
  routing->add_option("--t2sc", routing_t2sc, "Text2SQLCode traces, one path per method")->required();
  routing->add_option("--reference", routing_reference, "Text2SQL traces")->required();
  routing->add_option("--reference-run", reference_run, "Reference run index")->capture_default_str();
  routing->add_option("--out", routing_out, "Write routing.json and routing.md here");
  routing->add_option("--format", routing_format, "markdown | json (stdout)")
      ->check(CLI::IsMember({"markdown", "json"}))
      ->capture_default_str();
  routing_match.add(routing);

  // ------------------------------------------------------------- oracle
  auto* oracle = app.add_subcommand("oracle", "Post-hoc best-of-two combination of two methods");
  std::string oracle_dataset, oracle_a, oracle_b, oracle_out;
  MatchFlags oracle_match;
  oracle->add_option("--dataset", oracle_dataset, "Question file (JSONL)")->required();
  oracle->add_option("--a", oracle_a, "Traces of the first method")->required();
  oracle->add_option("--b", oracle_b, "Traces of the second method")->required();
  oracle->add_option("--out", oracle_out, "Write oracle.json and oracle.md here");
  oracle_match.add(oracle);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) {
      t2sc::BatchConfig cfg;
      cfg.questions = t2sc::load_dataset(dataset_path);
      const auto registry = t2sc::DbRegistry::load(registry_path);
      const auto prompts = t2sc::PromptLibrary::load(template_dir, t2sc::ExemplarStore::load(exemplar_dir));
      auto backend = make_backend(backend_spec);
      auto sandbox = make_sandbox(sandbox_spec);
      cfg.registry = &registry;
      cfg.prompts = &prompts;
      cfg.backend = backend.get();
      cfg.sandbox = sandbox.get();
      cfg.method = t2sc::MethodId::parse(method_text);
      cfg.runs = runs;
      cfg.seed = seed;
      cfg.workers = workers;
      if (sql_timeout <= 0 || code_timeout <= 0) throw t2sc::Error("timeouts must be positive");
      if (max_repairs < 0) throw t2sc::Error("--max-repairs must not be negative");
      cfg.limits.sql.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(sql_timeout * 1000));
      cfg.limits.sandbox.wall_timeout = std::chrono::milliseconds(static_cast<std::int64_t>(code_timeout * 1000));
      cfg.limits.max_repairs = max_repairs;
      cfg.match = run_match.config();
      cfg.model_id = model_id;
      cfg.temperature = temperature;
      cfg.out_dir = out_dir;
      cfg.record_timings = timings;
      cfg.keep_prompts = !no_prompts;

      const auto result = t2sc::run_batch(cfg);
      std::cerr << fmt::format("{}: {} trace(s) written, {} skipped, {} failed\n", cfg.method.str(), result.completed,
                               result.skipped, result.failed);
      for (const auto& e : result.errors) std::cerr << "  " << e << "\n";
      return result.complete() ? 0 : kExitPartial;
    }

    if (*eval) {
      const auto dataset = t2sc::load_dataset(eval_dataset);
      const auto records = load_all(eval_traces);
      const auto report = t2sc::score_traces(records, dataset, eval_match.config());
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
      if (!eval_out.empty()) {
        write_text(std::filesystem::path(eval_out) / "report.json", t2sc::report_to_json(report).dump(2) + "\n");
        write_text(std::filesystem::path(eval_out) / "report.md",
                   t2sc::report_to_markdown(report) + "\n" + t2sc::categories_to_markdown(report));
      }
      if (eval_format == "json") {
        std::cout << t2sc::report_to_json(report).dump(2) << "\n";
      } else {
        std::cout << t2sc::report_to_markdown(report);
        if (eval_categories) std::cout << "\n" << t2sc::categories_to_markdown(report);
      }
      return 0;
    }

    if (*routing) {
      const auto dataset = t2sc::load_dataset(routing_dataset);
      const auto reference = t2sc::load_trace_records(routing_reference);
      std::vector<t2sc::RoutingRow> rows;
      for (const auto& path : routing_t2sc) {
        const auto traces = load_all({path});
        rows.push_back(t2sc::routing_analysis(traces, reference, dataset, routing_match.config(), reference_run));
      }
      if (!routing_out.empty()) {
        write_text(std::filesystem::path(routing_out) / "routing.json", t2sc::routing_to_json(rows).dump(2) + "\n");
        write_text(std::filesystem::path(routing_out) / "routing.md", t2sc::routing_to_markdown(rows));
      }
      if (routing_format == "json") {
        std::cout << t2sc::routing_to_json(rows).dump(2) << "\n";
      } else {
        std::cout << t2sc::routing_to_markdown(rows);
      }
      return 0;
    }

    if (*oracle) {
      const auto dataset = t2sc::load_dataset(oracle_dataset);
      const auto a = load_all({oracle_a});
      const auto b = load_all({oracle_b});
      const auto cfg = oracle_match.config();
      auto combined = t2sc::oracle_records(a, b, dataset, cfg);
      std::vector<t2sc::TraceRecord> all(a.begin(), a.end());
      // Comparing a method with itself: its rows are already in.
      const bool same = !a.empty() && !b.empty() && a.front().method == b.front().method;
      if (!same) all.insert(all.end(), b.begin(), b.end());
      all.insert(all.end(), combined.begin(), combined.end());
      const auto report = t2sc::score_traces(all, dataset, cfg);
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
      if (!oracle_out.empty()) {
        write_text(std::filesystem::path(oracle_out) / "oracle.json", t2sc::report_to_json(report).dump(2) + "\n");
        write_text(std::filesystem::path(oracle_out) / "oracle.md", t2sc::report_to_markdown(report));
      }
      std::cout << t2sc::report_to_markdown(report);
      return 0;
    }
  } catch (const t2sc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return 0;
}
