#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mcqa/backend.hpp"
#include "mcqa/dataset.hpp"

namespace mcqa {

// Deterministic stand-in models. Every response is a pure function of the
// spec and the request.
struct MockModelSpec {
  enum class Kind {
    uniform,                 // flat: every token / candidate at ln(1/vocab)
    first_symbol_biased,     // symbol "A" always strictly on top
    order_invariant_oracle,  // scores the gold text highest, wherever it sits
    seeded_hash,             // pseudo-random logprobs hashed from the request
    length_biased,           // every completion token costs the same logprob
  };

  Kind kind = Kind::uniform;
  std::uint64_t seed = 0;
  std::size_t vocab = 4;
  // stem -> gold option texts, for the oracle (stems may repeat)
  std::map<std::string, std::set<std::string, std::less<>>, std::less<>> gold_by_stem;

  static MockModelSpec oracle_for(const std::vector<Question>& questions);
};

std::string_view to_string(MockModelSpec::Kind kind);
std::optional<MockModelSpec::Kind> parse_mock_kind(std::string_view text);

// Mock tokenization: each token is a run of whitespace followed by a run of
// non-whitespace (" French", " beans"). Trailing whitespace joins the last
// token. Concatenating the tokens gives back the text.
std::vector<std::string> mock_tokenize(std::string_view text);

class MockBackend final : public Backend {
 public:
  explicit MockBackend(MockModelSpec spec) : spec_(std::move(spec)) {}

  TokenLogProbs completion_logprobs(const CompletionRequest& request) override;
  SymbolDistribution next_symbol_distribution(const SymbolRequest& request) override;

  const MockModelSpec& spec() const noexcept { return spec_; }

 private:
  MockModelSpec spec_;
};

inline constexpr double kMockPreferred = -0.01;
inline constexpr double kMockRejected = -5.0;
inline constexpr double kMockLengthCost = -1.0;

}  // namespace mcqa
