#pragma once

#include <atomic>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "mcqa/scorer.hpp"

namespace mcqa {

struct CompletionRequest {
  std::string model_id;
  std::string context;
  std::string completion;
};

struct SymbolRequest {
  std::string model_id;
  std::string context;
  std::vector<std::string> candidates;  // symbol labels, e.g. "A"
};

/// A language model seen through the two queries the evaluation needs.
/// Implementations must be safe to call from several threads at once.
class Backend {
 public:
  virtual ~Backend() = default;

  // Per-token logprobs covering exactly the completion span.
  virtual TokenLogProbs completion_logprobs(const CompletionRequest& request) = 0;

  // One logprob per candidate for the token that follows the context.
  virtual SymbolDistribution next_symbol_distribution(const SymbolRequest& request) = 0;

  virtual std::size_t count_tokens(std::string_view text) const {
    return heuristic_token_count(text);
  }
};

// Checks requests against their preconditions; throws ContractError.
void check_request(const CompletionRequest& request);
void check_request(const SymbolRequest& request);

// Counts calls passing through to the wrapped backend.
class CountingBackend final : public Backend {
 public:
  explicit CountingBackend(Backend& inner) : inner_(inner) {}

  TokenLogProbs completion_logprobs(const CompletionRequest& request) override;
  SymbolDistribution next_symbol_distribution(const SymbolRequest& request) override;
  std::size_t count_tokens(std::string_view text) const override {
    return inner_.count_tokens(text);
  }

  std::size_t completion_calls() const noexcept { return completion_calls_.load(); }
  std::size_t symbol_calls() const noexcept { return symbol_calls_.load(); }
  std::size_t total_calls() const noexcept { return completion_calls() + symbol_calls(); }
  void reset() noexcept;

 private:
  Backend& inner_;
  std::atomic<std::size_t> completion_calls_{0};
  std::atomic<std::size_t> symbol_calls_{0};
};

}  // namespace mcqa
