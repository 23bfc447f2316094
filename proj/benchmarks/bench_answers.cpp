#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "t2sc/answer.hpp"
#include "t2sc/random.hpp"

namespace {

std::string literal(int rows, std::uint32_t seed, bool shuffled, const char* jitter = "") {
  std::vector<std::string> tuples;
  for (int i = 0; i < rows; ++i) {
    tuples.push_back("('name " + std::to_string(i) + "', " + std::to_string(i) + ".5" + jitter + ", " +
                     std::to_string(i * 7) + ")");
  }
  if (shuffled) std::shuffle(tuples.begin(), tuples.end(), std::mt19937(seed));
  std::string out = "[";
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    if (i) out += ", ";
    out += tuples[i];
  }
  return out + "]";
}

void BM_Canonicalize(benchmark::State& state) {
  const std::string text = literal(static_cast<int>(state.range(0)), 1, false);
  for (auto _ : state) benchmark::DoNotOptimize(t2sc::canonicalize_answer(text));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Canonicalize)->Arg(10)->Arg(1000)->Arg(10000);

void BM_MatchExact(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = t2sc::canonicalize_answer(literal(n, 1, false));
  const auto b = t2sc::canonicalize_answer(literal(n, 2, true));
  for (auto _ : state) benchmark::DoNotOptimize(t2sc::answers_match(a, b));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_MatchExact)->Arg(10)->Arg(1000)->Arg(10000);

void BM_MatchEpsilon(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = t2sc::canonicalize_answer(literal(n, 1, false));
  const auto b = t2sc::canonicalize_answer(literal(n, 2, true));
  t2sc::MatchConfig cfg;
  cfg.numeric_mode = t2sc::NumericMode::Epsilon;
  for (auto _ : state) benchmark::DoNotOptimize(t2sc::answers_match(a, b, cfg));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_MatchEpsilon)->Arg(10)->Arg(100)->Arg(1000);

// Values differ inside the tolerance, so no exact shortcut applies.
void BM_MatchEpsilonPerturbed(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = t2sc::canonicalize_answer(literal(n, 1, false));
  const auto b = t2sc::canonicalize_answer(literal(n, 2, true, "0000001"));
  t2sc::MatchConfig cfg;
  cfg.numeric_mode = t2sc::NumericMode::Epsilon;
  if (!t2sc::answers_match(a, b, cfg)) state.SkipWithError("perturbed answers should match");
  for (auto _ : state) benchmark::DoNotOptimize(t2sc::answers_match(a, b, cfg));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_MatchEpsilonPerturbed)->Arg(10)->Arg(100)->Arg(1000);

void BM_Majority(benchmark::State& state) {
  std::vector<t2sc::Prediction> preds;
  for (int i = 0; i < state.range(0); ++i) {
    preds.push_back(t2sc::canonicalize_answer(literal(20, static_cast<std::uint32_t>(i % 3), true)));
  }
  for (auto _ : state) {
    t2sc::SeededRandom rng(42);
    benchmark::DoNotOptimize(t2sc::majority_answer(preds, rng));
  }
}
BENCHMARK(BM_Majority)->Arg(3)->Arg(5)->Arg(15);

}  // namespace
