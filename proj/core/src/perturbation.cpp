#include "mcqa/perturbation.hpp"

#include <cctype>
#include <numeric>

#include "mcqa/errors.hpp"
#include "mcqa/seed.hpp"

namespace mcqa {

std::string_view to_string(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::none: return "none";
    case CorruptionKind::caps: return "caps";
    case CorruptionKind::space: return "space";
  }
  return "none";
}

std::optional<CorruptionKind> parse_corruption(std::string_view text) {
  if (text == "none") return CorruptionKind::none;
  if (text == "caps") return CorruptionKind::caps;
  if (text == "space") return CorruptionKind::space;
  return std::nullopt;
}

std::string corrupt_caps(std::string_view text, std::uint64_t seed) {
  Rng rng(seed);
  std::string out(text);
  for (auto& c : out) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x80 && std::isalpha(u)) {
      c = static_cast<char>(rng.coin() ? std::toupper(u) : std::tolower(u));
    }
  }
  return out;
}

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_continuation(char c) {
  return (static_cast<unsigned char>(c) & 0xC0) == 0x80;
}

}  // namespace

std::string corrupt_space(std::string_view text, std::uint64_t seed) {
  Rng rng(seed);
  std::string out;
  out.reserve(text.size() + text.size() / 3 + 1);
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(text[i])) {
      out += text[i++];
      continue;
    }
    std::size_t end = i;
    while (end < text.size() && !is_space(text[end])) ++end;
    std::string_view word = text.substr(i, end - i);

    // Byte offsets of code point starts, plus the end of the word.
    std::vector<std::size_t> slots;
    for (std::size_t b = 0; b < word.size(); ++b) {
      if (!is_continuation(word[b])) slots.push_back(b);
    }
    const std::size_t chars = slots.size();
    slots.push_back(word.size());

    if (chars >= 3) {
      const auto at = slots[static_cast<std::size_t>(rng.below(chars + 1))];
      out.append(word.substr(0, at));
      out += ' ';
      out.append(word.substr(at));
    } else {
      out.append(word);
    }
    i = end;
  }
  return out;
}

std::string corrupt(std::string_view text, const CorruptionSpec& spec) {
  switch (spec.kind) {
    case CorruptionKind::caps: return corrupt_caps(text, spec.seed);
    case CorruptionKind::space: return corrupt_space(text, spec.seed);
    case CorruptionKind::none: break;
  }
  return std::string(text);
}

Question corrupt_options(Question question, const CorruptionSpec& spec) {
  if (spec.kind == CorruptionKind::none) return question;
  for (std::size_t i = 0; i < question.options.size(); ++i) {
    const CorruptionSpec per_option{spec.kind,
                                    derive_seed(spec.seed, to_string(spec.kind), {}, i)};
    question.options[i] = corrupt(question.options[i], per_option);
  }
  return question;
}

Question strong_shuffle(Question question, std::uint64_t seed) {
  const std::size_t n = question.options.size();
  if (n < 2)
    throw ContractError("strong shuffle of " + question.id + " needs at least two options");

  std::vector<std::size_t> perm(n);
  Rng rng(seed);
  do {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(perm));
  } while (perm[question.gold_index] == question.gold_index);

  std::vector<std::string> options(n);
  std::size_t gold = 0;
  for (std::size_t slot = 0; slot < n; ++slot) {
    options[slot] = std::move(question.options[perm[slot]]);
    if (perm[slot] == question.gold_index) gold = slot;
  }
  question.options = std::move(options);
  question.gold_index = gold;
  return question;
}

}  // namespace mcqa
