#include "mcqa/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "mcqa/errors.hpp"
#include "mcqa/seed.hpp"

namespace mcqa {

using nlohmann::json;

std::string_view to_string(PassageKind kind) {
  switch (kind) {
    case PassageKind::none: return "none";
    case PassageKind::passage: return "passage";
    case PassageKind::story: return "story";
    case PassageKind::dialogue: return "dialogue";
  }
  return "none";
}

std::optional<PassageKind> parse_passage_kind(std::string_view text) {
  if (text == "none") return PassageKind::none;
  if (text == "passage") return PassageKind::passage;
  if (text == "story") return PassageKind::story;
  if (text == "dialogue") return PassageKind::dialogue;
  return std::nullopt;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "test";
}

std::optional<Split> parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "validation") return Split::validation;
  if (text == "test") return Split::test;
  return std::nullopt;
}

std::string_view to_string(ValidationFinding::Kind kind) {
  switch (kind) {
    case ValidationFinding::Kind::duplicate_id: return "duplicate_id";
    case ValidationFinding::Kind::pool_overlap: return "pool_overlap";
    case ValidationFinding::Kind::invalid_question: return "invalid_question";
  }
  return "invalid_question";
}

std::vector<std::string> Question::invariant_violations() const {
  std::vector<std::string> out;
  if (id.empty()) out.emplace_back("empty id");
  if (options.empty()) out.emplace_back("no options");
  if (options.size() > kMaxOptions)
    out.emplace_back(std::to_string(options.size()) + " options exceeds the A-Z alphabet");
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (options[i].empty()) out.emplace_back("option " + std::to_string(i) + " is empty");
  }
  if (gold_index >= options.size()) {
    out.emplace_back("gold_index " + std::to_string(gold_index) + " out of range for " +
                     std::to_string(options.size()) + " options");
  }
  if ((passage_kind == PassageKind::none) != !passage.has_value()) {
    out.emplace_back("passage_kind must be none exactly when passage is absent");
  }
  return out;
}

namespace {

const std::set<std::string, std::less<>> kKnownKeys = {"id",         "stem",    "options",
                                                       "gold_index", "passage", "passage_kind"};

Question parse_record(const std::string& line, std::size_t line_no) {
  json record;
  try {
    record = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError("", line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!record.is_object()) throw ParseError("", line_no, "record is not an object");

  std::string id;
  if (auto it = record.find("id"); it != record.end() && it->is_string()) {
    id = it->get<std::string>();
  } else if (it != record.end() && it->is_number_integer()) {
    id = std::to_string(it->get<long long>());
  } else {
    throw ParseError("", line_no, "missing string field 'id'");
  }

  for (const auto& item : record.items()) {
    if (!kKnownKeys.contains(item.key()))
      throw ParseError(id, line_no, "unknown field '" + item.key() + "'");
  }

  Question q;
  q.id = id;
  auto stem = record.find("stem");
  if (stem == record.end() || !stem->is_string())
    throw ParseError(id, line_no, "missing string field 'stem'");
  q.stem = stem->get<std::string>();

  auto options = record.find("options");
  if (options == record.end() || !options->is_array())
    throw ParseError(id, line_no, "missing array field 'options'");
  for (const auto& option : *options) {
    if (!option.is_string()) throw ParseError(id, line_no, "option is not a string");
    q.options.push_back(option.get<std::string>());
  }

  auto gold = record.find("gold_index");
  if (gold == record.end() || !gold->is_number_integer())
    throw ParseError(id, line_no, "missing integer field 'gold_index'");
  const auto gold_value = gold->get<long long>();
  if (gold_value < 0) throw ParseError(id, line_no, "gold_index is negative");
  q.gold_index = static_cast<std::size_t>(gold_value);

  if (auto passage = record.find("passage"); passage != record.end() && !passage->is_null()) {
    if (!passage->is_string()) throw ParseError(id, line_no, "passage is not a string");
    q.passage = passage->get<std::string>();
    q.passage_kind = PassageKind::passage;
  }
  if (auto kind = record.find("passage_kind"); kind != record.end() && !kind->is_null()) {
    if (!kind->is_string()) throw ParseError(id, line_no, "passage_kind is not a string");
    auto parsed = parse_passage_kind(kind->get<std::string>());
    if (!parsed) throw ParseError(id, line_no, "unknown passage_kind '" + kind->get<std::string>() + "'");
    q.passage_kind = *parsed;
  }

  auto violations = q.invariant_violations();
  if (!violations.empty()) throw ParseError(id, line_no, violations.front());
  return q;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

}  // namespace

std::vector<Question> read_questions(std::istream& in) {
  std::vector<Question> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    out.push_back(parse_record(line, line_no));
  }
  return out;
}

std::vector<Question> load_questions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_questions(in);
}

std::string serialize_question(const Question& question) {
  // Keys in fixed order so files diff cleanly.
  std::string out = "{\"id\":" + json(question.id).dump();
  out += ",\"stem\":" + json(question.stem).dump();
  out += ",\"options\":" + json(question.options).dump();
  out += ",\"gold_index\":" + std::to_string(question.gold_index);
  if (question.passage) {
    out += ",\"passage\":" + json(*question.passage).dump();
    out += ",\"passage_kind\":" + json(std::string(to_string(question.passage_kind))).dump();
  }
  out += "}";
  return out;
}

void write_questions(std::ostream& out, const std::vector<Question>& questions) {
  for (const auto& q : questions) out << serialize_question(q) << '\n';
}

void save_questions(const std::filesystem::path& path, const std::vector<Question>& questions) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_questions(out, questions);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path, Split split,
                     const std::optional<std::filesystem::path>& exemplar_path) {
  Dataset dataset;
  dataset.name = path.stem().string();
  dataset.split = split;
  dataset.questions = load_questions(path);
  if (exemplar_path) dataset.exemplar_pool = load_questions(*exemplar_path);
  return dataset;
}

Dataset sample_instances(const Dataset& dataset, std::size_t count, std::uint64_t seed) {
  Dataset out;
  out.name = dataset.name;
  out.split = dataset.split;
  out.exemplar_pool = dataset.exemplar_pool;
  const std::size_t total = dataset.questions.size();
  const std::size_t take = std::min(count, total);

  std::vector<std::size_t> index(total);
  std::iota(index.begin(), index.end(), std::size_t{0});
  // Partial Fisher-Yates: the first `take` slots are a uniform sample.
  Rng rng(derive_seed(seed, "sample_instances", dataset.name));
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(total - i));
    std::swap(index[i], index[j]);
  }
  index.resize(take);
  std::sort(index.begin(), index.end());
  out.questions.reserve(take);
  for (auto i : index) out.questions.push_back(dataset.questions[i]);
  return out;
}

ValidationReport validate_dataset(const Dataset& dataset) {
  ValidationReport report;
  std::unordered_map<std::string, std::size_t> seen;
  for (const auto& q : dataset.questions) {
    ++report.option_histogram[q.options.size()];
    if (++seen[q.id] == 2) {
      report.findings.push_back({ValidationFinding::Kind::duplicate_id, q.id,
                                 "id appears more than once among evaluation questions"});
    }
    for (auto& v : q.invariant_violations())
      report.findings.push_back({ValidationFinding::Kind::invalid_question, q.id, std::move(v)});
  }

  std::unordered_map<std::string, std::size_t> pool_seen;
  std::set<std::string> overlap_reported;
  for (const auto& q : dataset.exemplar_pool) {
    if (++pool_seen[q.id] == 2) {
      report.findings.push_back({ValidationFinding::Kind::duplicate_id, q.id,
                                 "id appears more than once in the exemplar pool"});
    }
    if (seen.contains(q.id) && overlap_reported.insert(q.id).second) {
      report.findings.push_back({ValidationFinding::Kind::pool_overlap, q.id,
                                 "id is both an exemplar and an evaluation question"});
    }
    for (auto& v : q.invariant_violations())
      report.findings.push_back(
          {ValidationFinding::Kind::invalid_question, q.id, "exemplar: " + std::move(v)});
  }
  return report;
}

}  // namespace mcqa
