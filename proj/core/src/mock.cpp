#include "mcqa/mock.hpp"

#include <algorithm>
#include <cmath>

#include "mcqa/errors.hpp"
#include "mcqa/seed.hpp"

namespace mcqa {

std::string_view to_string(MockModelSpec::Kind kind) {
  using K = MockModelSpec::Kind;
  switch (kind) {
    case K::uniform: return "uniform";
    case K::first_symbol_biased: return "first_symbol_biased";
    case K::order_invariant_oracle: return "order_invariant_oracle";
    case K::seeded_hash: return "seeded_hash";
    case K::length_biased: return "length_biased";
  }
  return "uniform";
}

std::optional<MockModelSpec::Kind> parse_mock_kind(std::string_view text) {
  using K = MockModelSpec::Kind;
  for (auto k : {K::uniform, K::first_symbol_biased, K::order_invariant_oracle, K::seeded_hash,
                 K::length_biased}) {
    if (text == to_string(k)) return k;
  }
  return std::nullopt;
}

MockModelSpec MockModelSpec::oracle_for(const std::vector<Question>& questions) {
  MockModelSpec spec;
  spec.kind = Kind::order_invariant_oracle;
  for (const auto& q : questions) spec.gold_by_stem[q.stem].insert(q.gold_text());
  return spec;
}

std::vector<std::string> mock_tokenize(std::string_view text) {
  auto space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t j = i;
    while (j < text.size() && space(text[j])) ++j;
    if (j == text.size()) {
      if (tokens.empty()) tokens.emplace_back(text.substr(i));
      else tokens.back().append(text.substr(i));
      break;
    }
    while (j < text.size() && !space(text[j])) ++j;
    tokens.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return tokens;
}

namespace {

double hashed_logprob(std::uint64_t seed, std::string_view context, std::string_view key,
                      std::uint64_t index) {
  const std::uint64_t h = derive_seed(seed, context, key, index);
  const double unit = static_cast<double>(h >> 11) * 0x1.0p-53;
  return -(0.01 + 9.99 * unit);
}

// Stem of the last "Question: ...\nAnswer:" block of a cloze context.
std::optional<std::string_view> cloze_stem(std::string_view context) {
  constexpr std::string_view kQuestion = "Question: ";
  constexpr std::string_view kAnswer = "\nAnswer:";
  const auto start = context.rfind(kQuestion);
  if (start == std::string_view::npos) return std::nullopt;
  if (context.size() < kAnswer.size() ||
      context.substr(context.size() - kAnswer.size()) != kAnswer)
    return std::nullopt;
  const auto begin = start + kQuestion.size();
  const auto end = context.size() - kAnswer.size();
  if (end < begin) return std::nullopt;
  return context.substr(begin, end - begin);
}

}  // namespace

TokenLogProbs MockBackend::completion_logprobs(const CompletionRequest& request) {
  check_request(request);
  using K = MockModelSpec::Kind;
  const double flat = -std::log(static_cast<double>(spec_.vocab));
  TokenLogProbs out;
  const auto tokens = mock_tokenize(request.completion);

  double per_token = flat;
  if (spec_.kind == K::length_biased) per_token = kMockLengthCost;
  if (spec_.kind == K::order_invariant_oracle) {
    if (auto stem = cloze_stem(request.context)) {
      std::string_view answer = request.completion;
      if (answer.starts_with(kCompletionSeparator)) answer.remove_prefix(kCompletionSeparator.size());
      auto gold = spec_.gold_by_stem.find(*stem);
      per_token = (gold != spec_.gold_by_stem.end() && gold->second.contains(answer)) ? kMockPreferred
                                                                                 : kMockRejected;
    }
  }

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const double lp = spec_.kind == K::seeded_hash
                          ? hashed_logprob(spec_.seed, request.context, request.completion, i)
                          : per_token;
    out.tokens.push_back({tokens[i], lp});
  }
  return out;
}

SymbolDistribution MockBackend::next_symbol_distribution(const SymbolRequest& request) {
  check_request(request);
  using K = MockModelSpec::Kind;
  const double flat = -std::log(static_cast<double>(spec_.vocab));
  SymbolDistribution out;

  switch (spec_.kind) {
    case K::uniform:
    case K::length_biased:
      for (const auto& c : request.candidates) out.entries[c] = flat;
      break;
    case K::first_symbol_biased:
      for (const auto& c : request.candidates) out.entries[c] = c == "A" ? kMockPreferred : kMockRejected;
      break;
    case K::seeded_hash:
      for (const auto& c : request.candidates)
        out.entries[c] = hashed_logprob(spec_.seed, request.context, c, 0);
      break;
    case K::order_invariant_oracle: {
      const std::string_view ctx = request.context;
      const auto question = ctx.rfind("Question: ");
      const auto answer = ctx.rfind("\nAnswer:");
      std::vector<std::size_t> starts;
      for (const auto& c : request.candidates) {
        const auto at = ctx.rfind("\n" + c + ". ", answer);
        const bool usable = at != std::string_view::npos && question != std::string_view::npos &&
                            answer != std::string_view::npos && at > question;
        starts.push_back(usable ? at : std::string_view::npos);
      }
      std::size_t stem_end = ctx.size();
      std::vector<std::string_view> texts;
      for (std::size_t i = 0; i < starts.size(); ++i) {
        if (starts[i] == std::string_view::npos) {
          texts.emplace_back();
          continue;
        }
        stem_end = std::min(stem_end, starts[i]);
        std::size_t end = answer;
        for (auto other : starts)
          if (other != std::string_view::npos && other > starts[i]) end = std::min(end, other);
        const auto begin = starts[i] + request.candidates[i].size() + 3;
        texts.push_back(ctx.substr(begin, end - begin));
      }
      const std::set<std::string, std::less<>>* golds = nullptr;
      if (question != std::string_view::npos && stem_end != ctx.size()) {
        const auto begin = question + std::string_view("Question: ").size();
        auto it = spec_.gold_by_stem.find(ctx.substr(begin, stem_end - begin));
        if (it != spec_.gold_by_stem.end()) golds = &it->second;
      }
      for (std::size_t i = 0; i < request.candidates.size(); ++i) {
        const bool hit = golds && !texts[i].empty() && golds->contains(texts[i]);
        out.entries[request.candidates[i]] = hit ? kMockPreferred : kMockRejected;
      }
      break;
    }
  }
  return out;
}

}  // namespace mcqa
