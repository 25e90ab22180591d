// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// gating criterion fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mcqa/dispatch.hpp"
#include "mcqa/errors.hpp"
#include "mcqa/mock.hpp"
#include "mcqa/perturbation.hpp"
#include "mcqa/remote.hpp"
#include "mcqa/report.hpp"
#include "mcqa/runner.hpp"
#include "mcqa/symbol_binding.hpp"
#include "stub_server.hpp"
#include "test_support.hpp"

using namespace mcqa;
using mcqa::testing::fixture;
using mcqa::testing::read_file;

namespace {

// Tolerances and limits.
constexpr double kNormalizationRelTol = 1e-12;
constexpr double kRateTargetSeconds = 60.0;
constexpr double kRateTolerance = 0.20;
constexpr std::size_t kRateRequests = 40;
constexpr double kRatePerMinute = 20.0;

struct Outcome {
  enum class Status { pass, fail, skip };
  Status status = Status::pass;
  std::string detail;
};

struct Criterion {
  int number;
  std::string name;
  double limit_seconds;
  bool gating;
  std::function<Outcome()> run;
};

Outcome pass(std::string detail) { return {Outcome::Status::pass, std::move(detail)}; }
Outcome fail(std::string detail) { return {Outcome::Status::fail, std::move(detail)}; }
Outcome skip(std::string detail) { return {Outcome::Status::skip, std::move(detail)}; }

std::string fmt(const char* pattern, double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, pattern, value);
  return buffer;
}

std::vector<Question> prompt_examples() { return load_questions(fixture("prompt_examples.jsonl")); }

Dataset synthetic_dataset(std::size_t count, std::size_t n, std::uint64_t seed) {
  Dataset ds;
  ds.name = "synthetic";
  ds.questions = mcqa::testing::synthetic_questions(count, n, seed);
  return ds;
}

std::size_t code_points(std::string_view word) {
  std::size_t n = 0;
  for (char c : word)
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  return n;
}

std::string strip(std::string_view text, char drop) {
  std::string out;
  for (char c : text)
    if (c != drop) out += c;
  return out;
}

std::string fold(std::string_view text) {
  std::string out(text);
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

std::string random_word(Rng& rng) {
  static const std::vector<std::string> pieces = {"a", "b", "e", "k", "Q", "z", "7", "-",
                                                  "\xc3\xa9", "\xe2\x82\xac", "\xf0\x9f\x8d\x95"};
  std::string word;
  const auto length = 1 + rng.below(8);
  for (std::uint64_t i = 0; i < length; ++i) word += pieces[rng.below(pieces.size())];
  return word;
}

// ---------------------------------------------------------------------------

Outcome prompt_goldens() {
  const auto questions = prompt_examples();
  for (const std::string id : {"openbookqa", "storycloze"}) {
    const auto q = mcqa::testing::find_question(questions, id);
    const auto rendered = render_mcp_prompt(q, AnswerBinding::identity(q.options.size())).text;
    const auto golden = read_file(fixture("prompts/" + id + ".txt"));
    if (rendered != golden) return fail(id + " rendering differs from its fixture");
  }
  const auto obqa = mcqa::testing::find_question(questions, "openbookqa");
  const auto story = mcqa::testing::find_question(questions, "storycloze");
  if (obqa.stem != "Greenhouses are great for plants like")
    return fail("unexpected OpenBookQA stem");
  if (!story.passage || story.passage->rfind("Jon loved the night sky", 0) != 0)
    return fail("unexpected StoryCloze passage");
  return pass("2/2 byte-identical");
}

Outcome normalization_exactness() {
  Rng rng(20221011);
  double worst_ln = 0.0, worst_un = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto vector_of = [&](std::size_t length) {
      std::vector<double> probs;
      TokenLogProbs tokens;
      for (std::size_t i = 0; i < length; ++i) {
        const double p = 0.001 + 0.999 * rng.unit();
        probs.push_back(p);
        tokens.tokens.push_back({"t", std::log(p)});
      }
      return std::pair{probs, tokens};
    };
    const auto [cond_p, cond] = vector_of(1 + rng.below(50));
    const auto [uncond_p, uncond] = vector_of(1 + rng.below(50));

    double cond_product = 1.0, uncond_product = 1.0;
    for (double p : cond_p) cond_product *= p;
    for (double p : uncond_p) uncond_product *= p;
    const double root = std::pow(cond_product, 1.0 / static_cast<double>(cond_p.size()));
    const double log_ratio = std::log(cond_product / uncond_product);

    const auto score = score_cloze(cond, uncond);
    worst_ln = std::max(worst_ln, std::abs(std::exp(score.ln) - root) / root);
    worst_un = std::max(worst_un, std::abs(*score.un - log_ratio) / std::max(1.0, std::abs(log_ratio)));
  }
  const std::string detail = "max rel err LN " + fmt("%.2e", worst_ln) + ", UN " + fmt("%.2e", worst_un);
  if (worst_ln > kNormalizationRelTol || worst_un > kNormalizationRelTol) return fail(detail);
  return pass(detail);
}

Outcome ppa_oracles() {
  const auto ds = synthetic_dataset(50, 4, 303);
  MockBackend oracle(MockModelSpec::oracle_for(ds.questions));
  const auto perfect = ppa_for_dataset(ds, oracle, {});
  if (perfect.dataset_ppa != 1.0) return fail("oracle PPA " + fmt("%.6f", perfect.dataset_ppa));

  MockModelSpec first;
  first.kind = MockModelSpec::Kind::first_symbol_biased;
  MockBackend biased(first);
  const auto flat = ppa_for_dataset(ds, biased, {});
  if (flat.dataset_ppa != 0.25) return fail("first-symbol PPA " + fmt("%.6f", flat.dataset_ppa));
  for (const auto& e : flat.per_question)
    if (e.orderings_used != 24 || e.ppa != 0.25) return fail("question " + e.id + " not at 0.25 over 24");

  Rng rng(404);
  for (int run = 0; run < 500; ++run) {
    const auto n = static_cast<std::size_t>(2 + rng.below(4));
    const auto q = mcqa::testing::synthetic_questions(1, n, rng.next(), "run").front();
    MockModelSpec spec;
    spec.kind = MockModelSpec::Kind::seeded_hash;
    spec.seed = rng.next();
    MockBackend hashed(spec);
    const auto orderings = orderings_for(n, kDefaultOrderingCap, 0);
    const auto entry = ppa_for_question(q, hashed, {}, orderings);
    if (entry.orderings_used != factorial_saturating(n)) return fail("enumeration incomplete");
    if (entry.plurality_count * n < entry.orderings_used)
      return fail("pigeonhole violated on run " + std::to_string(run));
  }
  return pass("oracle 1.0, first-symbol 0.25, 500/500 runs >= 1/N");
}

Outcome symbol_binding_failure() {
  const auto q = mcqa::testing::find_question(prompt_examples(), "openbookqa");
  MockModelSpec spec;
  spec.kind = MockModelSpec::Kind::first_symbol_biased;
  MockBackend biased(spec);
  auto choose = [&](const AnswerBinding& binding) {
    const auto prompt = render_mcp_prompt(q, binding);
    const auto dist = biased.next_symbol_distribution({"mock", prompt.text, binding.symbols});
    const auto scores = score_mcp(dist, binding);
    return q.options[select_answer(scores)];
  };
  const auto before = choose(AnswerBinding::identity(q.options.size()));
  const auto after = choose(AnswerBinding::from_permutation({3, 1, 0, 2}));
  const std::string detail = "\"" + before + "\" -> \"" + after + "\"";
  if (before != "Pizza" || after != "French beans") return fail(detail);
  return pass(detail);
}

Outcome call_count_law() {
  const auto ds = synthetic_dataset(100, 4, 505);
  MockBackend mock(MockModelSpec{});
  struct Case {
    Protocol protocol;
    ClozeStrategy strategy;
    std::size_t expected;
    const char* label;
  };
  std::string detail;
  for (const auto& c : {Case{Protocol::mcp, ClozeStrategy::raw, 100, "MCP"},
                        Case{Protocol::cp, ClozeStrategy::raw, 400, "raw"},
                        Case{Protocol::cp, ClozeStrategy::ln, 400, "LN"},
                        Case{Protocol::cp, ClozeStrategy::un, 800, "UN"}}) {
    CountingBackend counting(mock);
    EvalConfig config;
    config.protocol = c.protocol;
    config.cp_strategy = c.strategy;
    run_evaluation(config, ds, counting);
    detail += std::string(detail.empty() ? "" : ", ") + c.label + " " + std::to_string(counting.total_calls());
    if (counting.total_calls() != c.expected) return fail(detail);
  }
  return pass(detail);
}

Outcome perturbation_properties() {
  Rng rng(606);
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::string text;
    std::size_t long_words = 0;
    const auto words = 1 + rng.below(10);
    for (std::uint64_t w = 0; w < words; ++w) {
      const auto word = random_word(rng);
      if (code_points(word) >= 3) ++long_words;
      text += (w == 0 ? "" : " ") + word;
    }
    const auto seed = rng.next();

    const auto caps = corrupt_caps(text, seed);
    if (caps.size() != text.size() || fold(caps) != fold(text)) ++violations;

    const auto spaced = corrupt_space(text, seed);
    if (strip(spaced, ' ') != strip(text, ' ')) ++violations;
    if (std::count(spaced.begin(), spaced.end(), ' ') !=
        std::count(text.begin(), text.end(), ' ') + static_cast<std::ptrdiff_t>(long_words))
      ++violations;

    const auto n = static_cast<std::size_t>(2 + rng.below(5));
    auto q = mcqa::testing::synthetic_questions(1, n, rng.next(), "s").front();
    const auto shuffled = strong_shuffle(q, seed);
    auto before = q.options, after = shuffled.options;
    std::sort(before.begin(), before.end());
    std::sort(after.begin(), after.end());
    if (shuffled.gold_index == q.gold_index || before != after || shuffled.gold_text() != q.gold_text())
      ++violations;
  }
  const std::string detail = std::to_string(violations) + " violations in 3x1000 trials";
  return violations == 0 ? pass(detail) : fail(detail);
}

// Tokens for the rendered prompt, counted as ceil(bytes / 4). CP is measured
// on its longest conditional request.
std::size_t oracle_cost(const Question& target, const std::vector<Question>& prefix, Protocol protocol) {
  auto tokens = [](const std::string& text) { return (text.size() + 3) / 4; };
  if (protocol == Protocol::mcp)
    return tokens(render_mcp_prompt(target, AnswerBinding::identity(target.options.size()),
                                    bind_identity(prefix))
                      .text);
  std::size_t cost = 0;
  for (std::size_t i = 0; i < target.options.size(); ++i) {
    const auto prompts = render_cp_prompts(target, i, prefix);
    cost = std::max(cost, tokens(prompts.conditional.text + *prompts.conditional.completion));
  }
  return cost;
}

// Longest prefix of the seed-ordered pool that fits, by rendering every prefix.
std::size_t oracle_k(const std::vector<Question>& ordered, const Question& target, Protocol protocol,
                     std::size_t budget) {
  std::size_t best = 0;
  for (std::size_t k = 0; k <= ordered.size(); ++k) {
    const std::vector<Question> prefix(ordered.begin(), ordered.begin() + static_cast<std::ptrdiff_t>(k));
    if (oracle_cost(target, prefix, protocol) <= budget) best = k;
  }
  return best;
}

Outcome exemplar_packing() {
  Rng rng(707);
  std::size_t matches = 0, monotone = 0, packed_total = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto pool_size = static_cast<std::size_t>(5 + rng.below(36));
    std::vector<Question> pool;
    for (std::size_t i = 0; i < pool_size; ++i) {
      auto q = mcqa::testing::synthetic_questions(1, 2 + rng.below(4), rng.next(), "p").front();
      q.id = "pool" + std::to_string(i);
      q.stem += std::string(rng.below(120), 'w');
      pool.push_back(std::move(q));
    }
    const auto target = mcqa::testing::synthetic_questions(1, 2 + rng.below(4), rng.next(), "target").front();
    const auto protocol = trial % 2 == 0 ? Protocol::mcp : Protocol::cp;

    PackingOptions options;
    options.protocol = protocol;
    options.seed = rng.next();
    const auto ordered = seed_ordered_pool(pool, target, options.seed);
    const auto floor = oracle_cost(target, {}, protocol);

    std::vector<std::size_t> ks;
    std::size_t budget = floor + static_cast<std::size_t>(rng.below(200));
    bool all_match = true;
    for (int level = 0; level < 3; ++level) {
      options.token_budget = budget;
      const auto packed = pack_exemplars(pool, target, options);
      const auto expected = oracle_k(ordered, target, protocol, budget);
      if (packed.size() != expected || !std::equal(packed.begin(), packed.end(), ordered.begin()))
        all_match = false;
      ks.push_back(packed.size());
      packed_total += packed.size();
      budget += static_cast<std::size_t>(50 + rng.below(400));
    }
    if (all_match) ++matches;
    if (ks[0] <= ks[1] && ks[1] <= ks[2]) ++monotone;
  }
  const std::string detail = std::to_string(matches) + "/50 oracle matches, " + std::to_string(monotone) +
                             "/50 monotone, mean K " + fmt("%.1f", static_cast<double>(packed_total) / 150.0);
  return matches == 50 && monotone == 50 ? pass(detail) : fail(detail);
}

Outcome cache_and_rate_limit() {
  const auto dir = mcqa::testing::temp_dir("acceptance_cache");
  auto ds = synthetic_dataset(20, 4, 808);
  MockModelSpec spec;
  spec.kind = MockModelSpec::Kind::seeded_hash;
  MockBackend mock(spec);
  EvalConfig config;
  config.protocol = Protocol::cp;
  DispatchOptions options;
  options.cache_dir = dir;
  options.requests_per_minute = 1e6;

  Dispatcher cold(mock, options);
  const auto first = run_evaluation(config, ds, cold);
  Dispatcher warm(mock, options);
  const auto second = run_evaluation(config, ds, warm);
  if (cold.remote_dispatches() == 0) return fail("cold run made no dispatches");
  if (warm.remote_dispatches() != 0)
    return fail("warm run made " + std::to_string(warm.remote_dispatches()) + " dispatches");
  if (emit_report(first, ReportFormat::structured) != emit_report(second, ReportFormat::structured))
    return fail("cached run produced a different report");

  const auto payload = read_file(fixture("responses/symbol_top5.json"));
  mcqa::testing::StubServer server([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(payload, "application/json");
  });
  RemoteConfig remote_config;
  remote_config.endpoint = server.endpoint();
  RemoteBackend remote(remote_config);
  DispatchOptions limited;
  limited.requests_per_minute = kRatePerMinute;
  limited.max_in_flight = 4;
  Dispatcher dispatcher(remote, limited);

  const auto start = std::chrono::steady_clock::now();
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < 4; ++w) {
    workers.emplace_back([&, w] {
      for (std::size_t i = w; i < kRateRequests; i += 4)
        dispatcher.next_symbol_distribution({"stub", "request " + std::to_string(i), {"A", "B"}});
    });
  }
  for (auto& t : workers) t.join();
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const std::string detail = "warm dispatches 0; " + std::to_string(kRateRequests) + " requests in " +
                             fmt("%.1fs", elapsed);
  if (dispatcher.remote_dispatches() != kRateRequests) return fail(detail + " (dispatch count off)");
  if (elapsed < kRateTargetSeconds * (1 - kRateTolerance) || elapsed > kRateTargetSeconds * (1 + kRateTolerance))
    return fail(detail);
  return pass(detail);
}

Outcome end_to_end_determinism() {
  const auto dir = mcqa::testing::temp_dir("acceptance_determinism");
  save_questions(dir / "eval.jsonl", mcqa::testing::synthetic_questions(80, 4, 909));
  save_questions(dir / "pool.jsonl", mcqa::testing::synthetic_questions(30, 4, 910, "pool"));

  MockModelSpec spec;
  spec.kind = MockModelSpec::Kind::seeded_hash;
  spec.seed = 11;
  std::string detail;
  for (auto protocol : {Protocol::mcp, Protocol::cp}) {
    EvalConfig config;
    config.dataset_path = dir / "eval.jsonl";
    config.exemplar_path = dir / "pool.jsonl";
    config.protocol = protocol;
    config.shots = std::nullopt;
    config.token_budget = 400;
    config.seed = 12;
    config.corruption = CorruptionKind::space;
    config.strong_shuffle = true;
    config.sample_count = 50;
    config.workers = 3;
    std::string reports[2];
    for (auto& report : reports) {
      MockBackend mock(spec);
      report = emit_report(run_evaluation(config, mock), ReportFormat::structured);
    }
    if (reports[0] != reports[1]) return fail(std::string(to_string(protocol)) + " reports differ");
    detail += std::string(detail.empty() ? "" : ", ") + std::string(to_string(protocol)) + " " +
              std::to_string(reports[0].size()) + " bytes identical";
  }
  return pass(detail);
}

Outcome live_smoke() {
  const char* key = std::getenv(std::string(kApiKeyEnv).c_str());
  const char* endpoint = std::getenv("MCQA_ENDPOINT");
  if (!key || !endpoint) return skip("set MCQA_API_KEY and MCQA_ENDPOINT to run");
  const char* model = std::getenv("MCQA_MODEL");
  const char* dataset = std::getenv("MCQA_LIVE_DATASET");

  RemoteConfig remote_config;
  remote_config.endpoint = endpoint;
  remote_config.api_key = key;
  RemoteBackend remote(remote_config);
  DispatchOptions options;
  options.cache_dir = std::filesystem::temp_directory_path() / "mcqa_live_cache";
  Dispatcher dispatcher(remote, options);

  std::vector<EvalReport> reports;
  for (auto protocol : {Protocol::cp, Protocol::mcp}) {
    EvalConfig config;
    config.dataset_path = dataset ? std::filesystem::path(dataset) : fixture("prompt_examples.jsonl");
    config.protocol = protocol;
    config.model_id = model ? model : "davinci-002";
    config.sample_count = 20;
    auto report = run_evaluation(config, dispatcher);
    if (report.partial) return fail(std::string(to_string(protocol)) + " aborted: " + report.abort_reason);
    reports.push_back(std::move(report));
  }
  std::cout << comparison_table(reports);
  return pass("both protocols completed");
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "prompt golden renderings", 1, true, prompt_goldens},
      {2, "normalization exactness", 5, true, normalization_exactness},
      {3, "PPA oracles", 30, true, ppa_oracles},
      {4, "symbol-binding failure reproduction", 1, true, symbol_binding_failure},
      {5, "call-count law", 10, true, call_count_law},
      {6, "perturbation properties", 10, true, perturbation_properties},
      {7, "exemplar packing", 10, true, exemplar_packing},
      {8, "cache and rate limiting", 180, true, cache_and_rate_limit},
      {9, "end-to-end determinism", 30, true, end_to_end_determinism},
      {10, "live smoke (non-gating)", 600, false, live_smoke},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  bool ok = true;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.contains(c.number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = fail(std::string("exception: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (outcome.status == Outcome::Status::pass && seconds > c.limit_seconds)
      outcome = fail(outcome.detail + "; over the " + fmt("%.0fs", c.limit_seconds) + " limit");

    const char* label = outcome.status == Outcome::Status::pass   ? "PASS"
                        : outcome.status == Outcome::Status::skip ? "SKIP"
                                                                  : "FAIL";
    std::cout << label << "  [" << c.number << "] " << c.name << " (" << fmt("%.3fs", seconds)
              << "): " << outcome.detail << std::endl;
    if (c.gating && outcome.status == Outcome::Status::fail) ok = false;
  }
  return ok ? 0 : 1;
}
