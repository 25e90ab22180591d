#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcqa/prompt.hpp"

namespace mcqa {

struct Token {
  std::string text;
  double logprob = 0.0;

  friend bool operator==(const Token&, const Token&) = default;
};

struct TokenLogProbs {
  std::vector<Token> tokens;

  bool empty() const noexcept { return tokens.empty(); }
  std::size_t size() const noexcept { return tokens.size(); }
  double sum() const noexcept;
  std::string text() const;

  // Throws ContractError on a non-finite or positive logprob.
  void check() const;

  friend bool operator==(const TokenLogProbs&, const TokenLogProbs&) = default;
};

// Log-space cloze scores for one option.
//   raw = sum of completion token logprobs
//   ln  = raw / token count        (log of the nth root of the product)
//   un  = raw - unconditional raw  (log of the probability ratio)
struct ClozeScore {
  double raw = 0.0;
  double ln = 0.0;
  std::optional<double> un;

  friend bool operator==(const ClozeScore&, const ClozeScore&) = default;
};

ClozeScore score_cloze(const TokenLogProbs& conditional);
ClozeScore score_cloze(const TokenLogProbs& conditional, const TokenLogProbs& unconditional);

struct SymbolDistribution {
  std::map<std::string, double> entries;  // symbol label -> logprob
  std::vector<std::string> floored;       // labels that received the floor value

  friend bool operator==(const SymbolDistribution&, const SymbolDistribution&) = default;
};

// Per-option scores indexed by original option index.
std::vector<double> score_mcp(const SymbolDistribution& distribution,
                              const AnswerBinding& binding);

enum class Strategy { raw, ln, un, mcp };

std::string_view to_string(Strategy strategy);
std::optional<Strategy> parse_strategy(std::string_view text);

double pick(const ClozeScore& score, Strategy strategy);

// Smallest index attaining the maximum. Throws ContractError on empty input.
std::size_t select_answer(std::span<const double> scores);

}  // namespace mcqa
