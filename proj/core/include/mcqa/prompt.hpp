#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcqa/dataset.hpp"

namespace mcqa {

/// Binds display symbols to options for one rendering: the option shown
/// next to symbols[i] is options[permutation[i]].
struct AnswerBinding {
  std::vector<std::size_t> permutation;
  std::vector<std::string> symbols;

  static AnswerBinding identity(std::size_t n);
  // Symbols default to the first permutation.size() letters of A..Z.
  static AnswerBinding from_permutation(std::vector<std::size_t> permutation);

  std::size_t size() const noexcept { return permutation.size(); }

  // Display slot showing original option `option`.
  std::size_t slot_of(std::size_t option) const;

  // Throws ContractError unless permutation is a bijection on [0, n) and the
  // symbols are distinct and the same length.
  void check() const;

  friend bool operator==(const AnswerBinding&, const AnswerBinding&) = default;
};

std::vector<std::string> default_symbols(std::size_t n);

enum class Protocol { mcp, cp };

std::string_view to_string(Protocol protocol);
std::optional<Protocol> parse_protocol(std::string_view text);

enum class PromptKind { mcp, cp_conditional, cp_unconditional };

struct RenderedPrompt {
  std::string text;
  PromptKind kind = PromptKind::mcp;
  std::optional<AnswerBinding> binding;  // mcp only
  std::optional<std::string> completion;  // cp only
  std::size_t exemplar_count = 0;
};

struct BoundExemplar {
  Question question;
  AnswerBinding binding;
};

inline constexpr std::string_view kDefaultAnswerContext = "Answer: ";
// Prepended to every cloze completion.
inline constexpr std::string_view kCompletionSeparator = " ";
inline constexpr std::string_view kBlockSeparator = "\n\n";

RenderedPrompt render_mcp_prompt(const Question& question, const AnswerBinding& binding,
                                 std::span<const BoundExemplar> exemplars = {});

struct ClozePrompts {
  RenderedPrompt conditional;
  RenderedPrompt unconditional;
};

ClozePrompts render_cp_prompts(const Question& question, std::size_t option_index,
                               std::span<const Question> exemplars = {},
                               std::string_view answer_context = kDefaultAnswerContext);

using TokenCounter = std::function<std::size_t(std::string_view)>;

// ceil(bytes / 4)
std::size_t heuristic_token_count(std::string_view text) noexcept;

struct PackingOptions {
  std::size_t token_budget = 4000;
  Protocol protocol = Protocol::mcp;
  std::uint64_t seed = 0;
  TokenCounter counter = heuristic_token_count;
};

// Pool shuffled by derive_seed(seed, "exemplars", target.id), with any entry
// sharing the target's id removed.
std::vector<Question> seed_ordered_pool(std::span<const Question> pool,
                                        const Question& target, std::uint64_t seed);

// Tokens for the full prompt of `target` preceded by `exemplars`, measured on
// the costliest rendering the protocol can send.
std::size_t prompt_cost(const Question& target, std::span<const Question> exemplars,
                        Protocol protocol, const TokenCounter& counter);

/// Longest prefix of the seed-ordered pool whose complete prompt fits in the
/// token budget. Throws OverBudgetError if the target does not fit alone.
std::vector<Question> pack_exemplars(std::span<const Question> pool, const Question& target,
                                     const PackingOptions& options);

// Fixed K takes the first K of the seed-ordered pool (fewer if the pool is
// short); std::nullopt means "max" and packs against the budget.
std::vector<Question> select_exemplars(std::span<const Question> pool, const Question& target,
                                       std::optional<std::size_t> shots,
                                       const PackingOptions& options);

std::vector<BoundExemplar> bind_identity(std::span<const Question> exemplars);

}  // namespace mcqa
