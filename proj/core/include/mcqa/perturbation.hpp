#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "mcqa/dataset.hpp"

namespace mcqa {

enum class CorruptionKind { none, caps, space };

std::string_view to_string(CorruptionKind kind);
std::optional<CorruptionKind> parse_corruption(std::string_view text);

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::none;
  std::uint64_t seed = 0;
};

// Each ASCII letter independently upper- or lower-cased with probability 1/2.
// Every other byte is copied, so the length is unchanged.
std::string corrupt_caps(std::string_view text, std::uint64_t seed);

// For each whitespace-delimited word of at least three characters, inserts
// one space at a uniform position among the |w| + 1 slots (before, between
// characters, after). Characters are UTF-8 code points.
std::string corrupt_space(std::string_view text, std::uint64_t seed);

std::string corrupt(std::string_view text, const CorruptionSpec& spec);

// Applies `spec` to every option; option i uses derive_seed(spec.seed, kind, i).
Question corrupt_options(Question question, const CorruptionSpec& spec);

// Uniform draw among option permutations that move the gold answer to a new
// index. Throws ContractError when the question has a single option.
Question strong_shuffle(Question question, std::uint64_t seed);

}  // namespace mcqa
