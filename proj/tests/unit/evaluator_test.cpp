#include <algorithm>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "t2sc/evaluator.hpp"
#include "t2sc/trace.hpp"

using namespace t2sc;

namespace {

std::vector<Question> dataset(int n, const std::string& db = "db") {
  std::vector<Question> qs;
  for (int i = 0; i < n; ++i) {
    Question q;
    q.id = "q" + std::to_string(i);
    q.db_id = db;
    q.text = "question " + std::to_string(i);
    q.gold = canonicalize_answer("[(" + std::to_string(i) + ",)]");
    q.categories = {i % 2 ? "Odd" : "Even"};
    qs.push_back(std::move(q));
  }
  return qs;
}

TraceRecord rec(const std::string& qid, const std::string& method, int run, bool right, int gold,
                std::size_t calls = 1, bool python = false) {
  TraceRecord r;
  r.question_id = qid;
  r.method = method;
  r.run = run;
  r.prediction = canonicalize_answer("[(" + std::to_string(right ? gold : gold + 1000) + ",)]");
  r.llm_calls = calls;
  r.used_python = python;
  return r;
}

/// `correct_per_run[r]` questions (the first ones) correct in run r.
std::vector<TraceRecord> runs_with(const std::vector<Question>& qs, const std::string& method,
                                   const std::vector<int>& correct_per_run) {
  std::vector<TraceRecord> out;
  for (int r = 0; r < static_cast<int>(correct_per_run.size()); ++r) {
    for (int i = 0; i < static_cast<int>(qs.size()); ++i) out.push_back(rec(qs[i].id, method, r, i < correct_per_run[r], i));
  }
  return out;
}

}  // namespace

TEST(Score, MeanOverRuns) {
  const auto qs = dataset(10);
  const auto records = runs_with(qs, "text2sql", {7, 7, 8});
  const auto report = score_traces(records, qs);
  const auto* m = report.find("text2sql");
  ASSERT_NE(m, nullptr);
  EXPECT_EQ(m->runs, 3);
  EXPECT_EQ(m->traces, 30u);
  EXPECT_NEAR(m->overall, 220.0 / 3.0, 1e-9);
  EXPECT_EQ(format_pct(m->overall), "73.3");
  EXPECT_DOUBLE_EQ(m->mean_calls, 1.0);
  EXPECT_TRUE(report.warnings.empty());
}

TEST(Score, PerDatabaseAndCategory) {
  auto qs = dataset(4, "a");
  auto more = dataset(6, "b");
  for (auto& q : more) q.id += "b";
  qs.insert(qs.end(), more.begin(), more.end());
  std::vector<TraceRecord> records;
  for (int i = 0; i < 10; ++i) {
    const int gold = i < 4 ? i : i - 4;
    const bool right = (i < 4) ? i < 2 : true;
    records.push_back(rec(qs[i].id, "m", 0, right, gold));
  }
  const auto report = score_traces(records, qs);
  const auto* m = report.find("m");
  EXPECT_DOUBLE_EQ(m->by_db.at("a"), 50.0);
  EXPECT_DOUBLE_EQ(m->by_db.at("b"), 100.0);
  EXPECT_DOUBLE_EQ(m->overall, 80.0);
  EXPECT_EQ(report.db_ids, (std::vector<std::string>{"a", "b"}));
  EXPECT_TRUE(m->by_category.contains("Odd"));
}

TEST(Score, MissingTracesCountAsIncorrect) {
  const auto qs = dataset(10);
  auto records = runs_with(qs, "m", {10});
  records.pop_back();
  records.pop_back();
  const auto report = score_traces(records, qs);
  EXPECT_DOUBLE_EQ(report.find("m")->overall, 80.0);
  ASSERT_FALSE(report.warnings.empty());
  EXPECT_NE(report.warnings[0].find("2 question"), std::string::npos);
}

TEST(Score, DuplicateAndUnknownRejected) {
  const auto qs = dataset(2);
  std::vector<TraceRecord> dup = {rec("q0", "m", 0, true, 0), rec("q0", "m", 0, true, 0)};
  EXPECT_THROW(score_traces(dup, qs), Error);
  std::vector<TraceRecord> unknown = {rec("zz", "m", 0, true, 0)};
  EXPECT_THROW(score_traces(unknown, qs), UnknownQuestion);
}

TEST(Score, FailureNeverCorrect) {
  auto qs = dataset(1);
  qs[0].gold = AnswerSet{};
  TraceRecord r = rec("q0", "m", 0, true, 0);
  r.prediction = std::nullopt;
  const std::vector<TraceRecord> records = {r};
  EXPECT_DOUBLE_EQ(score_traces(records, qs).find("m")->overall, 0.0);
}

TEST(Score, InvariantUnderRecordOrder) {
  const auto qs = dataset(25);
  std::mt19937 gen(3);
  std::vector<TraceRecord> records;
  for (int r = 0; r < 3; ++r) {
    for (int i = 0; i < 25; ++i) records.push_back(rec(qs[i].id, r % 2 ? "a" : "b", r, gen() % 2, i, gen() % 5));
  }
  const auto base = score_traces(records, qs);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(records.begin(), records.end(), gen);
    EXPECT_EQ(score_traces(records, qs), base);
  }
}

TEST(OracleRecords, PairsByQuestionAndRun) {
  const auto qs = dataset(10);
  std::vector<TraceRecord> a, b;
  for (int i = 0; i < 10; ++i) {
    a.push_back(rec(qs[i].id, "text2sql", 0, i < 3, i, 1));
    b.push_back(rec(qs[i].id, "t2sc-multi", 0, i >= 6, i, 3));
  }
  const auto oracle = oracle_records(a, b, qs);
  ASSERT_EQ(oracle.size(), 10u);
  EXPECT_EQ(oracle[0].method, "oracle(text2sql,t2sc-multi)");
  EXPECT_EQ(oracle[0].llm_calls, 4u);
  EXPECT_DOUBLE_EQ(score_traces(oracle, qs).methods.at(0).overall, 70.0);
  b.pop_back();
  EXPECT_EQ(oracle_records(a, b, qs).size(), 9u);
  b.push_back(rec("q9", "other", 0, true, 9));
  EXPECT_THROW(oracle_records(a, b, qs), Error);
}

TEST(Routing, SubsetDeltas) {
  // Reference correct on q0..q4. Python used on 3/5 of those and on all of q5..q9.
  const auto qs = dataset(10);
  std::vector<TraceRecord> ref, t2sc;
  for (int i = 0; i < 10; ++i) {
    ref.push_back(rec(qs[i].id, "text2sql", 0, i < 5, i));
    t2sc.push_back(rec(qs[i].id, "hybrid-multi", 0, true, i, 3, i >= 2));
  }
  const auto row = routing_analysis(t2sc, ref, qs);
  EXPECT_EQ(row.questions, 10u);
  EXPECT_EQ(row.reference_correct, 5u);
  EXPECT_DOUBLE_EQ(row.pct_full, 80.0);
  EXPECT_NEAR(*row.delta_correct, -20.0, 1e-9);
  EXPECT_NEAR(*row.delta_incorrect, 20.0, 1e-9);
  EXPECT_EQ(format_delta(*row.delta_correct), "-20.0");
  EXPECT_EQ(format_delta(*row.delta_incorrect), "+20.0");
}

TEST(Routing, EverythingRoutedGivesZeroDeltas) {
  const auto qs = dataset(6);
  std::vector<TraceRecord> ref, t2sc;
  for (int i = 0; i < 6; ++i) {
    ref.push_back(rec(qs[i].id, "text2sql", 0, i % 2, i));
    t2sc.push_back(rec(qs[i].id, "t2sc-multi", 0, true, i, 3, true));
  }
  const auto row = routing_analysis(t2sc, ref, qs);
  EXPECT_DOUBLE_EQ(row.pct_full, 100.0);
  EXPECT_DOUBLE_EQ(*row.delta_correct, 0.0);
  EXPECT_DOUBLE_EQ(*row.delta_incorrect, 0.0);
}

TEST(Routing, FractionalAcrossRunsAndEmptySubset) {
  const auto qs = dataset(2);
  std::vector<TraceRecord> ref = {rec("q0", "text2sql", 0, true, 0), rec("q1", "text2sql", 0, true, 1),
                                  rec("q0", "text2sql", 1, false, 0)};
  std::vector<TraceRecord> t2sc;
  for (int r = 0; r < 4; ++r) {
    t2sc.push_back(rec("q0", "t2sc-multi", r, true, 0, 2, r == 0));
    t2sc.push_back(rec("q1", "t2sc-multi", r, true, 1, 2, r < 2));
  }
  const auto row = routing_analysis(t2sc, ref, qs);
  // (1/4 + 2/4) / 2
  EXPECT_DOUBLE_EQ(row.pct_full, 37.5);
  EXPECT_FALSE(row.delta_incorrect);
  EXPECT_DOUBLE_EQ(*row.delta_correct, 0.0);
}

TEST(Routing, CoverageMismatch) {
  const auto qs = dataset(3);
  std::vector<TraceRecord> ref = {rec("q0", "text2sql", 0, true, 0), rec("q1", "text2sql", 0, true, 1)};
  std::vector<TraceRecord> t2sc = {rec("q0", "t2sc-multi", 0, true, 0), rec("q2", "t2sc-multi", 0, true, 2)};
  EXPECT_THROW(routing_analysis(t2sc, ref, qs), CoverageMismatch);
  EXPECT_THROW(routing_analysis({}, {}, qs), CoverageMismatch);
}

TEST(Export, MarkdownHeadersAndCalls) {
  Report empty;
  empty.db_ids = {"imdb", "es"};
  const std::string header = report_to_markdown(empty);
  EXPECT_NE(header.find("Method"), std::string::npos);
  EXPECT_NE(header.find("Overall"), std::string::npos);
  EXPECT_NE(header.find("imdb"), std::string::npos);
  EXPECT_NE(header.find("Calls"), std::string::npos);

  const auto qs = dataset(10);
  const auto records = runs_with(qs, "text2sql", {7, 7, 8});
  const std::string md = report_to_markdown(score_traces(records, qs));
  EXPECT_NE(md.find("| text2sql"), std::string::npos);
  EXPECT_NE(md.find("73.3"), std::string::npos);
  EXPECT_NE(md.find("1.0"), std::string::npos);
}

TEST(Export, JsonRoundTripIsStable) {
  const auto qs = dataset(10);
  auto records = runs_with(qs, "text2sql", {7, 7, 8});
  auto more = runs_with(qs, "sc:3", {9});
  records.insert(records.end(), more.begin(), more.end());
  const auto report = score_traces(records, qs);
  const auto doc = report_to_json(report);
  const auto back = report_from_json(doc);
  EXPECT_EQ(back, report);
  EXPECT_EQ(report_to_json(back).dump(), doc.dump());
  EXPECT_EQ(report_to_markdown(back), report_to_markdown(report));
  EXPECT_FALSE(categories_to_markdown(report).empty());
}

TEST(Export, RoutingJsonAndMarkdown) {
  RoutingRow row;
  row.method = "hybrid-multi";
  row.questions = 149;
  row.reference_correct = 51;
  row.reference_incorrect = 98;
  row.pct_full = 85.23;
  row.delta_correct = -4.83;
  row.delta_incorrect = 2.5;
  const std::vector<RoutingRow> rows = {row};
  EXPECT_EQ(routing_from_json(routing_to_json(rows)), rows);
  const std::string md = routing_to_markdown(rows);
  EXPECT_NE(md.find("85.2"), std::string::npos);
  EXPECT_NE(md.find("-4.8"), std::string::npos);
  EXPECT_NE(md.find("+2.5"), std::string::npos);
}

TEST(Format, OneDecimal) {
  EXPECT_EQ(format_pct(0), "0.0");
  EXPECT_EQ(format_pct(100), "100.0");
  EXPECT_EQ(format_pct(66.66), "66.7");
  // Values that round to zero carry no sign.
  EXPECT_EQ(format_delta(0), "0.0");
  EXPECT_EQ(format_delta(-0.04), "0.0");
  EXPECT_EQ(format_delta(0.05), "+0.1");
}
