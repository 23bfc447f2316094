#include <gtest/gtest.h>

#include "t2sc/dataset.hpp"
#include "t2sc/prompting.hpp"
#include "t2sc/schema_context.hpp"
#include "test_support.hpp"

using namespace t2sc;
using namespace t2sc::testing;

namespace {

std::size_t count(const std::string& hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

struct Fixture {
  PromptLibrary lib = PromptLibrary::load(templates_dir(), ExemplarStore::load(exemplars_dir()));
  DbSchemaContext ctx;
  Question q;

  Fixture() {
    const auto reg = DbRegistry::load(mini_registry());
    ctx = introspect_schema(Database::open_read_only(reg.at("films").path), reg.at("films"));
    q.id = "q1";
    q.db_id = "films";
    q.text = "How many movies were released after 2000?";
  }

  PromptExtras full_extras() const {
    PromptExtras e;
    e.step = "Count the movies released after 2000.";
    e.decomposition = "Text2SQL: Count the movies released after 2000.";
    e.shapes = "listOfDFs[0]: 1 rows";
    e.artifact = "SELECT count(*) FROM movie";
    e.error = "no such column: yr";
    return e;
  }
};

}  // namespace

TEST(Prompting, EveryTemplateLoadsAndRenders) {
  Fixture f;
  for (PromptKind kind : kAllPromptKinds) {
    const std::string text = f.lib.render(kind, f.ctx, f.q, f.full_extras());
    EXPECT_FALSE(text.empty()) << template_name(kind);
    EXPECT_EQ(text.find('{' + std::string("schema}")), std::string::npos) << template_name(kind);
    // The output-format instruction appears exactly once in every prompt.
    EXPECT_EQ(count(text, kOutputFormatInstruction), 1u) << template_name(kind);
  }
}

TEST(Prompting, SignaturesPresent) {
  Fixture f;
  const auto e = f.full_extras();
  EXPECT_NE(f.lib.render(PromptKind::Text2Python, f.ctx, f.q, e).find(kMultiSignature), std::string::npos);
  EXPECT_NE(f.lib.render(PromptKind::SingleShot, f.ctx, f.q, e).find(kSingleSignature), std::string::npos);
}

TEST(Prompting, KnowledgePromptHasNoSchema) {
  Fixture f;
  const std::string text = f.lib.render(PromptKind::Knowledge, f.ctx, f.q, {});
  EXPECT_EQ(text.find("-- Table:"), std::string::npos);
  EXPECT_EQ(text.find("```sql"), std::string::npos);
  EXPECT_NE(text.find("Do not write SQL or code"), std::string::npos);
  EXPECT_NE(text.find(f.q.text), std::string::npos);
}

TEST(Prompting, SchemaPromptsIncludeContext) {
  Fixture f;
  const std::string text = f.lib.render(PromptKind::Text2Sql, f.ctx, f.q, {});
  EXPECT_NE(text.find(render_context(f.ctx)), std::string::npos);
  EXPECT_NE(text.find(f.q.text), std::string::npos);
}

TEST(Prompting, StepReplacesQuestionInStepMode) {
  Fixture f;
  PromptExtras e;
  e.step = "List every genre.";
  const std::string text = f.lib.render(PromptKind::Text2Sql, f.ctx, f.q, e);
  EXPECT_NE(text.find("List every genre."), std::string::npos);
  EXPECT_EQ(text.find(f.q.text), std::string::npos);
}

TEST(Prompting, FormatRulesAppended) {
  Fixture f;
  PromptExtras e;
  e.format_rules = "  Dates are YYYY-MM-DD.\n";
  const std::string text = f.lib.render(PromptKind::Knowledge, f.ctx, f.q, e);
  EXPECT_NE(text.find(std::string(kOutputFormatInstruction) + "\nDates are YYYY-MM-DD."), std::string::npos);
}

TEST(Prompting, MissingExtrasNamesKind) {
  Fixture f;
  try {
    f.lib.render(PromptKind::RepairSql, f.ctx, f.q, {});
    FAIL() << "expected MissingExtras";
  } catch (const MissingExtras& e) {
    EXPECT_EQ(e.kind(), PromptKind::RepairSql);
  }
  EXPECT_THROW(f.lib.render(PromptKind::Text2Python, f.ctx, f.q, {}), MissingExtras);
  EXPECT_THROW(f.lib.render(PromptKind::RepairCode, f.ctx, f.q, {}), MissingExtras);
}

TEST(Prompting, TemplateValidation) {
  std::map<PromptKind, std::string> tpls;
  for (PromptKind kind : kAllPromptKinds) tpls[kind] = PromptLibrary::load(templates_dir()).raw(kind);
  EXPECT_NO_THROW(PromptLibrary::from_templates(tpls));

  auto bad = tpls;
  bad[PromptKind::Knowledge] = "{question} {format_rules} {nonsense}";
  EXPECT_THROW(PromptLibrary::from_templates(bad), TemplateError);

  bad = tpls;
  bad[PromptKind::Text2Sql] = "{question} {format_rules}";
  EXPECT_THROW(PromptLibrary::from_templates(bad), TemplateError);

  bad = tpls;
  bad[PromptKind::Knowledge] = "{question} {format_rules} " + std::string(kOutputFormatInstruction);
  EXPECT_THROW(PromptLibrary::from_templates(bad), TemplateError);

  bad = tpls;
  bad.erase(PromptKind::RepairCode);
  EXPECT_THROW(PromptLibrary::from_templates(bad), TemplateError);

  EXPECT_THROW(PromptLibrary::load("/nonexistent/templates"), TemplateError);
}

TEST(Exemplars, ExcludeQuestionDomain) {
  ExemplarStore store;
  store.add("alpha", PromptKind::Decomposer, "ALPHA-EXAMPLE");
  store.add("beta", PromptKind::Decomposer, "BETA-EXAMPLE");
  store.add("gamma", PromptKind::SingleShot, "GAMMA-EXAMPLE");
  const std::string s = store.select(PromptKind::Decomposer, "alpha");
  EXPECT_EQ(s.find("ALPHA"), std::string::npos);
  EXPECT_NE(s.find("BETA-EXAMPLE"), std::string::npos);
  EXPECT_EQ(s.find("GAMMA"), std::string::npos);
  // A placeholder keeps the prompt readable when nothing is left.
  EXPECT_EQ(store.select(PromptKind::Knowledge, "x"), "(no examples available)\n");
}

TEST(Exemplars, ShippedStoreNeverLeaksOwnDomain) {
  const auto store = ExemplarStore::load(exemplars_dir());
  for (const char* domain : {"imdb", "es", "ol"}) {
    const std::string own = read_file(exemplars_dir() / domain / "decomposer.txt");
    const std::string picked = store.select(PromptKind::Decomposer, domain);
    EXPECT_FALSE(picked.empty()) << domain;
    // The first exemplar line of a domain is unique to it.
    const std::string first_line = own.substr(0, own.find('\n'));
    EXPECT_EQ(picked.find(first_line), std::string::npos) << domain;
  }
}

TEST(ExtractFenced, PrefersLastTaggedBlock) {
  EXPECT_EQ(extract_fenced("```sql\nSELECT 1\n```\ntext\n```sql\nSELECT 2\n```", "sql"), "SELECT 2");
  EXPECT_EQ(extract_fenced("```SQL\nSELECT 3\n```", "sql"), "SELECT 3");
  EXPECT_EQ(extract_fenced("```python\nx = 1\n```\n```sql\nSELECT 4\n```", "sql"), "SELECT 4");
}

TEST(ExtractFenced, FallsBackToBareBlock) {
  EXPECT_EQ(extract_fenced("```\nSELECT 5\n```", "sql"), "SELECT 5");
  EXPECT_EQ(extract_fenced("```SELECT 6```", "sql"), "SELECT 6");
  EXPECT_EQ(extract_fenced("```sql\nSELECT 7\n```\n```\nother\n```", "sql"), "SELECT 7");
}

TEST(ExtractFenced, UnterminatedBlockTakesRest) {
  EXPECT_EQ(extract_fenced("```python\ndef f():\n    return 1\n", "python"), "def f():\n    return 1");
}

TEST(ExtractFenced, NoBlock) {
  EXPECT_THROW(extract_fenced("SELECT 1", "sql"), NoBlockFound);
  EXPECT_THROW(extract_fenced("```python\nx\n```", "sql"), NoBlockFound);
}

TEST(Decomposition, ParsesSteps) {
  const auto d = parse_decomposition(
      "Let me think.\nDecomposition:\nText2SQL: Get the ratings.\nPython: Compute the median.\n");
  ASSERT_EQ(d.steps.size(), 2u);
  EXPECT_EQ(d.steps[0], (DecompositionStep{StepKind::Sql, "Get the ratings."}));
  EXPECT_EQ(d.steps[1], (DecompositionStep{StepKind::Code, "Compute the median."}));
  EXPECT_EQ(d.cot_preamble, "Let me think.\n");
  EXPECT_TRUE(d.has_code_steps());
  EXPECT_EQ(d.sql_step_count(), 1u);
  EXPECT_TRUE(d.warnings.empty());
}

TEST(Decomposition, UsesLastMarkerAndTolerantPrefixes) {
  const auto d = parse_decomposition(
      "Decomposition:\nText2SQL: draft\n\n**Decomposition:**\n1. text2sql: Fetch A.\n- **Text2SQL:** Fetch B.\n"
      "Some commentary\nPython: Join.");
  ASSERT_EQ(d.steps.size(), 3u);
  EXPECT_EQ(d.sql_steps(), (std::vector<std::string>{"Fetch A.", "Fetch B."}));
  ASSERT_EQ(d.warnings.size(), 1u);
  EXPECT_NE(d.warnings[0].find("Some commentary"), std::string::npos);
}

TEST(Decomposition, SqlOnly) {
  const auto d = parse_decomposition("Decomposition: Text2SQL: Count rows.");
  ASSERT_EQ(d.steps.size(), 1u);
  EXPECT_FALSE(d.has_code_steps());
}

TEST(Decomposition, FlagsDependentSqlSteps) {
  const auto d = parse_decomposition(
      "Decomposition:\nText2SQL: List ids.\nText2SQL: Names for the ids from the previous step.\n");
  EXPECT_EQ(d.steps.size(), 2u);
  ASSERT_EQ(d.warnings.size(), 1u);
}

TEST(Decomposition, Errors) {
  try {
    parse_decomposition("Text2SQL: x");
    FAIL();
  } catch (const DecompositionError& e) {
    EXPECT_EQ(e.reason(), DecompositionError::Reason::NoMarker);
  }
  try {
    parse_decomposition("Decomposition:\nPython: only code");
    FAIL();
  } catch (const DecompositionError& e) {
    EXPECT_EQ(e.reason(), DecompositionError::Reason::NoSqlSteps);
  }
}

TEST(Decomposition, RenderRoundTrips) {
  Decomposition d;
  d.steps = {{StepKind::Sql, "A"}, {StepKind::Sql, "B"}, {StepKind::Code, "C"}};
  const auto back = parse_decomposition("Decomposition:\n" + d.render());
  EXPECT_EQ(back.steps, d.steps);
  EXPECT_EQ(back.render(), d.render());
}
