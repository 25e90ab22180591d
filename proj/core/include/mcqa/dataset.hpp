#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mcqa {

enum class PassageKind { none, passage, story, dialogue };

std::string_view to_string(PassageKind kind);
std::optional<PassageKind> parse_passage_kind(std::string_view text);

inline constexpr std::size_t kMaxOptions = 26;

struct Question {
  std::string id;
  std::optional<std::string> passage;
  PassageKind passage_kind = PassageKind::none;
  std::string stem;
  std::vector<std::string> options;
  std::size_t gold_index = 0;

  std::size_t option_count() const noexcept { return options.size(); }
  const std::string& gold_text() const { return options.at(gold_index); }

  // Empty when every invariant holds; otherwise one message per violation.
  std::vector<std::string> invariant_violations() const;

  friend bool operator==(const Question&, const Question&) = default;
};

enum class Split { train, validation, test };

std::string_view to_string(Split split);
std::optional<Split> parse_split(std::string_view text);

struct Dataset {
  std::string name;
  Split split = Split::test;
  std::vector<Question> questions;
  std::vector<Question> exemplar_pool;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Canonical format: one JSON object per line with keys
// {id, stem, options, gold_index, passage?, passage_kind?}. Blank lines are
// ignored. Throws ParseError naming the record id and line.
std::vector<Question> read_questions(std::istream& in);
std::vector<Question> load_questions(const std::filesystem::path& path);

void write_questions(std::ostream& out, const std::vector<Question>& questions);
void save_questions(const std::filesystem::path& path,
                    const std::vector<Question>& questions);

std::string serialize_question(const Question& question);

// Dataset name defaults to the file stem.
Dataset load_dataset(const std::filesystem::path& path, Split split = Split::test,
                     const std::optional<std::filesystem::path>& exemplar_path = {});

// Uniform sample without replacement of min(count, |questions|) questions,
// returned in their original file order. The exemplar pool is untouched.
Dataset sample_instances(const Dataset& dataset, std::size_t count, std::uint64_t seed);

struct ValidationFinding {
  enum class Kind { duplicate_id, pool_overlap, invalid_question };
  Kind kind;
  std::string question_id;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationFinding> findings;
  // option count -> number of evaluation questions with that count
  std::map<std::size_t, std::size_t> option_histogram;

  bool ok() const noexcept { return findings.empty(); }
};

ValidationReport validate_dataset(const Dataset& dataset);

std::string_view to_string(ValidationFinding::Kind kind);

}  // namespace mcqa
