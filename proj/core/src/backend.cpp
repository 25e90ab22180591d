#include "mcqa/backend.hpp"

#include <set>

#include "mcqa/errors.hpp"

namespace mcqa {

void check_request(const CompletionRequest& request) {
  if (request.completion.empty()) throw ContractError("completion must be non-empty");
}

void check_request(const SymbolRequest& request) {
  if (request.context.empty()) throw ContractError("symbol request needs a context");
  if (request.candidates.empty()) throw ContractError("symbol request needs candidates");
  std::set<std::string_view> distinct;
  for (const auto& c : request.candidates) {
    if (c.empty()) throw ContractError("empty candidate symbol");
    if (!distinct.insert(c).second) throw ContractError("duplicate candidate symbol '" + c + "'");
  }
}

TokenLogProbs CountingBackend::completion_logprobs(const CompletionRequest& request) {
  ++completion_calls_;
  return inner_.completion_logprobs(request);
}

SymbolDistribution CountingBackend::next_symbol_distribution(const SymbolRequest& request) {
  ++symbol_calls_;
  return inner_.next_symbol_distribution(request);
}

void CountingBackend::reset() noexcept {
  completion_calls_ = 0;
  symbol_calls_ = 0;
}

}  // namespace mcqa
