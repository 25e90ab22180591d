#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcqa/backend.hpp"
#include "mcqa/dataset.hpp"
#include "mcqa/prompt.hpp"

namespace mcqa {

inline constexpr std::size_t kDefaultOrderingCap = 720;

// All n! bindings in lexicographic order when n! <= cap, otherwise `cap`
// distinct bindings drawn uniformly without replacement from `seed`.
std::vector<AnswerBinding> orderings_for(std::size_t n, std::size_t cap, std::uint64_t seed);

// n! saturated at SIZE_MAX.
std::size_t factorial_saturating(std::size_t n) noexcept;

// Everything the MCP protocol needs beyond the target question: exemplars
// keep their bindings fixed while the target binding varies.
struct McpProtocol {
  std::string model_id;
  std::vector<BoundExemplar> exemplars;
};

struct PpaEntry {
  std::string id;
  std::size_t option_count = 0;
  std::size_t orderings_used = 0;
  std::size_t plurality_count = 0;
  double ppa = 0.0;
  bool sampled = false;  // orderings were capped, not fully enumerated
  std::vector<std::size_t> selections;  // option chosen per ordering

  friend bool operator==(const PpaEntry&, const PpaEntry&) = default;
};

struct PpaSkip {
  std::string id;
  std::string reason;

  friend bool operator==(const PpaSkip&, const PpaSkip&) = default;
};

struct PpaResult {
  std::vector<PpaEntry> per_question;
  std::vector<PpaSkip> skipped;
  double dataset_ppa = 0.0;
  bool sampled = false;  // any question used capped orderings
  std::size_t backend_calls = 0;

  friend bool operator==(const PpaResult&, const PpaResult&) = default;
};

// Plurality statistics from one selected option per ordering.
PpaEntry summarize_selections(std::string id, std::size_t option_count,
                              std::vector<std::size_t> selections, bool sampled);

/// Presents `question` under every binding in `orderings` and measures how
/// often the most frequently chosen option is selected. Backend failures are
/// rethrown as BackendError naming the ordering index.
PpaEntry ppa_for_question(const Question& question, Backend& backend,
                          const McpProtocol& protocol,
                          std::span<const AnswerBinding> orderings, std::size_t workers = 1);

struct PpaOptions {
  std::string model_id;
  std::size_t cap = kDefaultOrderingCap;
  std::uint64_t seed = 0;
  std::optional<std::size_t> shots = 0;  // nullopt packs as many as fit
  std::size_t token_budget = 4000;
  bool skip_on_error = false;
  std::size_t workers = 1;
};

PpaResult ppa_for_dataset(const Dataset& dataset, Backend& backend, const PpaOptions& options);

}  // namespace mcqa
