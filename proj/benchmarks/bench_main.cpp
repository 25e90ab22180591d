#include <benchmark/benchmark.h>

#include <cmath>

#include "mcqa/mock.hpp"
#include "mcqa/perturbation.hpp"
#include "mcqa/prompt.hpp"
#include "mcqa/scorer.hpp"
#include "mcqa/seed.hpp"
#include "mcqa/symbol_binding.hpp"

namespace {

using namespace mcqa;

std::vector<Question> make_questions(std::size_t count, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Question> out;
  for (std::size_t i = 0; i < count; ++i) {
    Question q;
    q.id = "q" + std::to_string(i);
    q.stem = "Benchmark question " + std::to_string(i) + " about " + std::string(20 + rng.below(80), 'x');
    for (std::size_t j = 0; j < n; ++j) q.options.push_back("option " + std::to_string(j) + " text");
    q.gold_index = static_cast<std::size_t>(rng.below(n));
    out.push_back(std::move(q));
  }
  return out;
}

void BM_ScoreCloze(benchmark::State& state) {
  TokenLogProbs cond, uncond;
  Rng rng(1);
  for (int i = 0; i < state.range(0); ++i) {
    cond.tokens.push_back({"t", std::log(0.01 + 0.98 * rng.unit())});
    uncond.tokens.push_back({"t", std::log(0.01 + 0.98 * rng.unit())});
  }
  for (auto _ : state) benchmark::DoNotOptimize(score_cloze(cond, uncond));
}
BENCHMARK(BM_ScoreCloze)->Arg(1)->Arg(10)->Arg(50);

void BM_RenderMcp(benchmark::State& state) {
  const auto questions = make_questions(9, 4, 2);
  const auto exemplars = bind_identity(std::span<const Question>(questions).subspan(1, state.range(0)));
  const auto binding = AnswerBinding::identity(4);
  for (auto _ : state) benchmark::DoNotOptimize(render_mcp_prompt(questions[0], binding, exemplars));
}
BENCHMARK(BM_RenderMcp)->Arg(0)->Arg(8);

void BM_PackExemplars(benchmark::State& state) {
  const auto pool = make_questions(static_cast<std::size_t>(state.range(0)), 4, 3);
  const auto target = make_questions(1, 4, 4).front();
  PackingOptions options;
  for (auto _ : state) benchmark::DoNotOptimize(pack_exemplars(pool, target, options));
}
BENCHMARK(BM_PackExemplars)->Arg(100)->Arg(1000);

void BM_OrderingsFor(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(orderings_for(n, kDefaultOrderingCap, 5));
}
BENCHMARK(BM_OrderingsFor)->Arg(4)->Arg(6)->Arg(10);

void BM_PpaMock(benchmark::State& state) {
  const auto q = make_questions(1, 4, 6).front();
  MockModelSpec spec;
  spec.kind = MockModelSpec::Kind::seeded_hash;
  MockBackend mock(spec);
  const auto orderings = orderings_for(4, kDefaultOrderingCap, 0);
  for (auto _ : state) benchmark::DoNotOptimize(ppa_for_question(q, mock, {}, orderings));
}
BENCHMARK(BM_PpaMock);

void BM_CorruptSpace(benchmark::State& state) {
  const std::string text = "The quick brown fox jumps over the lazy dog near the riverbank";
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(corrupt_space(text, ++seed));
}
BENCHMARK(BM_CorruptSpace);

}  // namespace

BENCHMARK_MAIN();
