#include "mcqa/symbol_binding.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>

#include "mcqa/errors.hpp"
#include "mcqa/parallel.hpp"
#include "mcqa/scorer.hpp"
#include "mcqa/seed.hpp"

namespace mcqa {

std::size_t factorial_saturating(std::size_t n) noexcept {
  std::size_t out = 1;
  for (std::size_t i = 2; i <= n; ++i) {
    if (out > std::numeric_limits<std::size_t>::max() / i) return std::numeric_limits<std::size_t>::max();
    out *= i;
  }
  return out;
}

std::vector<AnswerBinding> orderings_for(std::size_t n, std::size_t cap, std::uint64_t seed) {
  if (n < 2 || n > kMaxOptions)
    throw ContractError("orderings need 2..26 options, got " + std::to_string(n));
  if (cap == 0) throw ContractError("ordering cap must be at least 1");

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<AnswerBinding> out;

  if (factorial_saturating(n) <= cap) {
    out.reserve(factorial_saturating(n));
    do {
      out.push_back(AnswerBinding::from_permutation(perm));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
  }

  Rng rng(seed);
  std::set<std::vector<std::size_t>> seen;
  out.reserve(cap);
  while (out.size() < cap) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(perm));
    if (seen.insert(perm).second) out.push_back(AnswerBinding::from_permutation(perm));
  }
  return out;
}

PpaEntry summarize_selections(std::string id, std::size_t option_count,
                              std::vector<std::size_t> selections, bool sampled) {
  if (selections.empty()) throw ContractError("no selections for " + id);
  std::vector<std::size_t> counts(option_count, 0);
  for (auto s : selections) {
    if (s >= option_count) throw ContractError("selection out of range for " + id);
    ++counts[s];
  }
  PpaEntry entry;
  entry.id = std::move(id);
  entry.option_count = option_count;
  entry.orderings_used = selections.size();
  entry.plurality_count = *std::max_element(counts.begin(), counts.end());
  entry.ppa = static_cast<double>(entry.plurality_count) / static_cast<double>(entry.orderings_used);
  entry.sampled = sampled;
  entry.selections = std::move(selections);
  return entry;
}

PpaEntry ppa_for_question(const Question& question, Backend& backend,
                          const McpProtocol& protocol,
                          std::span<const AnswerBinding> orderings, std::size_t workers) {
  if (orderings.empty()) throw ContractError("no orderings for " + question.id);
  const std::size_t n = question.options.size();
  for (const auto& o : orderings) {
    if (o.size() != n)
      throw ContractError("ordering of length " + std::to_string(o.size()) + " for " +
                          question.id + " with " + std::to_string(n) + " options");
  }

  std::vector<std::size_t> selections(orderings.size());
  parallel_for(orderings.size(), workers, [&](std::size_t i) {
    const auto& binding = orderings[i];
    const auto prompt = render_mcp_prompt(question, binding, protocol.exemplars);
    try {
      const auto distribution =
          backend.next_symbol_distribution({protocol.model_id, prompt.text, binding.symbols});
      const auto scores = score_mcp(distribution, binding);
      selections[i] = select_answer(scores);
    } catch (const BackendError& e) {
      throw BackendError(e.kind(), "ordering " + std::to_string(i) + " of " + question.id + ": " + e.what(),
                         e.raw_payload(), e.attempt_log());
    }
  });
  const bool sampled = orderings.size() < factorial_saturating(n);
  return summarize_selections(question.id, n, std::move(selections), sampled);
}

PpaResult ppa_for_dataset(const Dataset& dataset, Backend& backend, const PpaOptions& options) {
  if (dataset.questions.empty()) throw ContractError("PPA needs at least one question");

  const auto& questions = dataset.questions;
  std::vector<std::optional<PpaEntry>> entries(questions.size());
  std::vector<std::string> errors(questions.size());

  parallel_for(questions.size(), options.workers, [&](std::size_t qi) {
    const Question& q = questions[qi];
    try {
      PackingOptions packing;
      packing.token_budget = options.token_budget;
      packing.protocol = Protocol::mcp;
      packing.seed = options.seed;
      packing.counter = [&backend](std::string_view t) { return backend.count_tokens(t); };
      const auto exemplars = select_exemplars(dataset.exemplar_pool, q, options.shots, packing);
      McpProtocol protocol{options.model_id, bind_identity(exemplars)};
      const auto orderings =
          orderings_for(q.options.size(), options.cap, derive_seed(options.seed, "orderings", q.id));
      entries[qi] = ppa_for_question(q, backend, protocol, orderings);
    } catch (const std::exception& e) {
      if (!options.skip_on_error) throw;
      errors[qi] = e.what();
    }
  });

  PpaResult result;
  double total = 0.0;
  for (std::size_t qi = 0; qi < questions.size(); ++qi) {
    if (!entries[qi]) {
      result.skipped.push_back({questions[qi].id, errors[qi]});
      continue;
    }
    total += entries[qi]->ppa;
    result.sampled = result.sampled || entries[qi]->sampled;
    result.backend_calls += entries[qi]->orderings_used;
    result.per_question.push_back(std::move(*entries[qi]));
  }
  if (!result.per_question.empty())
    result.dataset_ppa = total / static_cast<double>(result.per_question.size());
  return result;
}

}  // namespace mcqa
