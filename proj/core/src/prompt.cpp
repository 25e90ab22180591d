#include "mcqa/prompt.hpp"

#include <algorithm>
#include <set>

#include "mcqa/errors.hpp"
#include "mcqa/seed.hpp"

namespace mcqa {

std::vector<std::string> default_symbols(std::size_t n) {
  if (n > kMaxOptions) throw ContractError("at most 26 symbols are available");
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(1, static_cast<char>('A' + i));
  return out;
}

AnswerBinding AnswerBinding::identity(std::size_t n) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  return from_permutation(std::move(perm));
}

AnswerBinding AnswerBinding::from_permutation(std::vector<std::size_t> permutation) {
  AnswerBinding binding;
  binding.symbols = default_symbols(permutation.size());
  binding.permutation = std::move(permutation);
  return binding;
}

std::size_t AnswerBinding::slot_of(std::size_t option) const {
  auto it = std::find(permutation.begin(), permutation.end(), option);
  if (it == permutation.end())
    throw ContractError("option " + std::to_string(option) + " is not bound");
  return static_cast<std::size_t>(it - permutation.begin());
}

void AnswerBinding::check() const {
  if (symbols.size() != permutation.size())
    throw ContractError("binding has " + std::to_string(symbols.size()) + " symbols for " +
                        std::to_string(permutation.size()) + " slots");
  std::vector<bool> hit(permutation.size(), false);
  for (auto p : permutation) {
    if (p >= permutation.size() || hit[p]) throw ContractError("binding is not a permutation");
    hit[p] = true;
  }
  std::set<std::string_view> distinct(symbols.begin(), symbols.end());
  if (distinct.size() != symbols.size()) throw ContractError("binding symbols are not distinct");
}

std::string_view to_string(Protocol protocol) {
  return protocol == Protocol::mcp ? "mcp" : "cp";
}

std::optional<Protocol> parse_protocol(std::string_view text) {
  if (text == "mcp") return Protocol::mcp;
  if (text == "cp") return Protocol::cp;
  return std::nullopt;
}

namespace {

std::string_view passage_prefix(PassageKind kind) {
  switch (kind) {
    case PassageKind::passage: return "Passage: ";
    case PassageKind::story: return "Story: ";
    case PassageKind::dialogue: return "Dialogue: ";
    case PassageKind::none: break;
  }
  return "";
}

void append_header(std::string& out, const Question& q) {
  if (q.passage && q.passage_kind != PassageKind::none) {
    out += passage_prefix(q.passage_kind);
    out += *q.passage;
    out += '\n';
  }
  out += "Question: ";
  out += q.stem;
  out += '\n';
}

void append_mcp_block(std::string& out, const Question& q, const AnswerBinding& binding) {
  binding.check();
  if (binding.size() != q.options.size())
    throw ContractError("binding of length " + std::to_string(binding.size()) + " for question " +
                        q.id + " with " + std::to_string(q.options.size()) + " options");
  append_header(out, q);
  for (std::size_t slot = 0; slot < binding.size(); ++slot) {
    out += binding.symbols[slot];
    out += ". ";
    out += q.options[binding.permutation[slot]];
    out += '\n';
  }
  out += "Answer:";
}

void append_separator(std::string& out) {
  if (!out.empty()) out += kBlockSeparator;
}

std::string cp_context(const Question& q, std::span<const Question> exemplars) {
  std::string out;
  for (const auto& ex : exemplars) {
    append_separator(out);
    append_header(out, ex);
    out += "Answer: ";
    out += ex.gold_text();
  }
  append_separator(out);
  append_header(out, q);
  out += "Answer:";
  return out;
}

}  // namespace

RenderedPrompt render_mcp_prompt(const Question& question, const AnswerBinding& binding,
                                 std::span<const BoundExemplar> exemplars) {
  RenderedPrompt prompt;
  prompt.kind = PromptKind::mcp;
  for (const auto& ex : exemplars) {
    append_separator(prompt.text);
    append_mcp_block(prompt.text, ex.question, ex.binding);
    prompt.text += ' ';
    prompt.text += ex.binding.symbols[ex.binding.slot_of(ex.question.gold_index)];
  }
  append_separator(prompt.text);
  append_mcp_block(prompt.text, question, binding);
  prompt.binding = binding;
  prompt.exemplar_count = exemplars.size();
  return prompt;
}

ClozePrompts render_cp_prompts(const Question& question, std::size_t option_index,
                               std::span<const Question> exemplars,
                               std::string_view answer_context) {
  if (option_index >= question.options.size())
    throw ContractError("option index " + std::to_string(option_index) + " out of range for " +
                        question.id);
  std::string completion(kCompletionSeparator);
  completion += question.options[option_index];

  ClozePrompts out;
  out.conditional.text = cp_context(question, exemplars);
  out.conditional.kind = PromptKind::cp_conditional;
  out.conditional.completion = completion;
  out.conditional.exemplar_count = exemplars.size();

  out.unconditional.text = std::string(answer_context);
  out.unconditional.kind = PromptKind::cp_unconditional;
  out.unconditional.completion = std::move(completion);
  return out;
}

std::size_t heuristic_token_count(std::string_view text) noexcept {
  return (text.size() + 3) / 4;
}

std::vector<Question> seed_ordered_pool(std::span<const Question> pool, const Question& target,
                                        std::uint64_t seed) {
  std::vector<Question> ordered;
  ordered.reserve(pool.size());
  for (const auto& q : pool) {
    if (q.id != target.id) ordered.push_back(q);
  }
  Rng rng(derive_seed(seed, "exemplars", target.id));
  rng.shuffle(std::span<Question>(ordered));
  return ordered;
}

std::size_t prompt_cost(const Question& target, std::span<const Question> exemplars,
                        Protocol protocol, const TokenCounter& counter) {
  if (protocol == Protocol::mcp) {
    auto bound = bind_identity(exemplars);
    return counter(render_mcp_prompt(target, AnswerBinding::identity(target.options.size()), bound).text);
  }
  auto prompts = render_cp_prompts(target, 0, exemplars);
  std::size_t cost = 0;
  for (const auto& option : target.options) {
    std::string text = prompts.conditional.text;
    text += kCompletionSeparator;
    text += option;
    cost = std::max(cost, counter(text));
  }
  return cost;
}

std::vector<Question> pack_exemplars(std::span<const Question> pool, const Question& target,
                                     const PackingOptions& options) {
  if (options.token_budget == 0) throw ContractError("token budget must be positive");
  const std::size_t bare = prompt_cost(target, {}, options.protocol, options.counter);
  if (bare > options.token_budget) throw OverBudgetError(target.id, bare, options.token_budget);

  auto ordered = seed_ordered_pool(pool, target, options.seed);
  std::size_t k = 0;
  while (k < ordered.size()) {
    std::span<const Question> prefix(ordered.data(), k + 1);
    if (prompt_cost(target, prefix, options.protocol, options.counter) > options.token_budget) break;
    ++k;
  }
  ordered.resize(k);
  return ordered;
}

std::vector<Question> select_exemplars(std::span<const Question> pool, const Question& target,
                                       std::optional<std::size_t> shots,
                                       const PackingOptions& options) {
  if (!shots) return pack_exemplars(pool, target, options);
  auto ordered = seed_ordered_pool(pool, target, options.seed);
  if (ordered.size() > *shots) ordered.resize(*shots);
  const std::size_t cost = prompt_cost(target, ordered, options.protocol, options.counter);
  if (cost > options.token_budget) throw OverBudgetError(target.id, cost, options.token_budget);
  return ordered;
}

std::vector<BoundExemplar> bind_identity(std::span<const Question> exemplars) {
  std::vector<BoundExemplar> out;
  out.reserve(exemplars.size());
  for (const auto& q : exemplars) out.push_back({q, AnswerBinding::identity(q.options.size())});
  return out;
}

}  // namespace mcqa
