#pragma once

#include <chrono>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcqa/backend.hpp"

namespace mcqa {

enum class SymbolSurface {
  leading_space,  // score " A"
  either,         // log(P("A") + P(" A"))
};

inline constexpr double kDefaultFloorLogprob = -100.0;
inline constexpr std::string_view kApiKeyEnv = "MCQA_API_KEY";

struct RemoteConfig {
  std::string endpoint;  // full URL of a completions-style endpoint
  std::string api_key;
  int top_k = 5;
  std::optional<double> floor_logprob = kDefaultFloorLogprob;
  SymbolSurface surface = SymbolSurface::leading_space;
  std::chrono::seconds timeout{60};
};

// Request bodies sent to the endpoint.
std::string completion_request_body(const CompletionRequest& request);
std::string symbol_request_body(const SymbolRequest& request, int top_k);

// Pulls the completion span out of an echo response: the tokens whose text
// offset is at or past `context_bytes`. Throws BackendError(protocol) when
// the span tokens do not concatenate to `completion`.
TokenLogProbs parse_echo_logprobs(std::string_view payload, std::size_t context_bytes,
                                  std::string_view completion);

// Reads the top-k alternatives of the first generated token.
SymbolDistribution parse_symbol_logprobs(std::string_view payload,
                                         std::span<const std::string> candidates,
                                         SymbolSurface surface,
                                         std::optional<double> floor_logprob);

/// Client for a completions API that returns per-token logprobs with echo
/// and top-k alternatives. Status 429, 5xx and transport failures are
/// retryable; other non-2xx statuses are terminal.
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig config);

  TokenLogProbs completion_logprobs(const CompletionRequest& request) override;
  SymbolDistribution next_symbol_distribution(const SymbolRequest& request) override;

  const RemoteConfig& config() const noexcept { return config_; }

 private:
  std::string post(const std::string& body) const;

  RemoteConfig config_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;
};

}  // namespace mcqa
