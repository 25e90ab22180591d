#include "mcqa/scorer.hpp"

#include <cmath>

#include "mcqa/errors.hpp"

namespace mcqa {

double TokenLogProbs::sum() const noexcept {
  double total = 0.0;
  for (const auto& t : tokens) total += t.logprob;
  return total;
}

std::string TokenLogProbs::text() const {
  std::string out;
  for (const auto& t : tokens) out += t.text;
  return out;
}

void TokenLogProbs::check() const {
  for (const auto& t : tokens) {
    if (!std::isfinite(t.logprob) || t.logprob > 0.0)
      throw ContractError("token '" + t.text + "' has invalid logprob " + std::to_string(t.logprob));
  }
}

ClozeScore score_cloze(const TokenLogProbs& conditional) {
  if (conditional.empty()) throw ContractError("cannot score an empty completion");
  conditional.check();
  ClozeScore score;
  score.raw = conditional.sum();
  score.ln = score.raw / static_cast<double>(conditional.size());
  return score;
}

ClozeScore score_cloze(const TokenLogProbs& conditional, const TokenLogProbs& unconditional) {
  ClozeScore score = score_cloze(conditional);
  if (unconditional.empty()) throw ContractError("cannot normalize by an empty completion");
  unconditional.check();
  score.un = score.raw - unconditional.sum();
  return score;
}

std::vector<double> score_mcp(const SymbolDistribution& distribution,
                              const AnswerBinding& binding) {
  binding.check();
  std::vector<double> scores(binding.size());
  for (std::size_t slot = 0; slot < binding.size(); ++slot) {
    auto it = distribution.entries.find(binding.symbols[slot]);
    if (it == distribution.entries.end())
      throw ContractError("distribution has no entry for symbol '" + binding.symbols[slot] + "'");
    scores[binding.permutation[slot]] = it->second;
  }
  return scores;
}

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::raw: return "raw";
    case Strategy::ln: return "ln";
    case Strategy::un: return "un";
    case Strategy::mcp: return "mcp";
  }
  return "raw";
}

std::optional<Strategy> parse_strategy(std::string_view text) {
  if (text == "raw") return Strategy::raw;
  if (text == "ln") return Strategy::ln;
  if (text == "un") return Strategy::un;
  if (text == "mcp") return Strategy::mcp;
  return std::nullopt;
}

double pick(const ClozeScore& score, Strategy strategy) {
  switch (strategy) {
    case Strategy::raw: return score.raw;
    case Strategy::ln: return score.ln;
    case Strategy::un:
      if (!score.un) throw ContractError("score has no unconditional term");
      return *score.un;
    case Strategy::mcp: break;
  }
  throw ContractError("mcp is not a cloze strategy");
}

std::size_t select_answer(std::span<const double> scores) {
  if (scores.empty()) throw ContractError("no scores to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

}  // namespace mcqa
