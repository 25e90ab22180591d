#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mcqa/backend.hpp"
#include "mcqa/dataset.hpp"
#include "mcqa/perturbation.hpp"
#include "mcqa/prompt.hpp"

namespace mcqa {

enum class ClozeStrategy { raw, ln, un, best_of_all };

std::string_view to_string(ClozeStrategy strategy);
std::optional<ClozeStrategy> parse_cloze_strategy(std::string_view text);

// "max" <-> std::nullopt
std::string shots_label(std::optional<std::size_t> shots);
std::optional<std::optional<std::size_t>> parse_shots(std::string_view text);

struct EvalConfig {
  std::filesystem::path dataset_path;
  std::optional<std::filesystem::path> exemplar_path;
  Split split = Split::test;
  Protocol protocol = Protocol::mcp;
  ClozeStrategy cp_strategy = ClozeStrategy::best_of_all;
  std::optional<std::size_t> shots = 0;
  std::size_t token_budget = 4000;
  std::uint64_t seed = 0;
  CorruptionKind corruption = CorruptionKind::none;
  bool strong_shuffle = false;
  std::optional<std::size_t> sample_count;
  std::string answer_context = std::string(kDefaultAnswerContext);
  std::string model_id = "mock";
  std::string backend_label = "mock:uniform";
  bool skip_over_budget = true;
  std::size_t workers = 1;
  // Each finished record is appended here as one JSON line.
  std::optional<std::filesystem::path> partial_path;

  // Throws ConfigError.
  void check() const;

  // Stable key/value echo written into reports.
  std::vector<std::pair<std::string, std::string>> echo() const;
};

struct EvalRecord {
  std::string id;
  std::string tag;
  std::size_t option_count = 0;
  std::size_t exemplar_count = 0;
  std::size_t gold_index = 0;
  std::optional<std::size_t> chosen;
  bool correct = false;
  bool skipped = false;
  std::string note;
  std::size_t calls = 0;
  std::size_t floor_uses = 0;
  // strategy name ("mcp", "raw", "ln", "un") -> per-option scores / choice
  std::map<std::string, std::vector<double>> scores;
  std::map<std::string, std::size_t> choices;

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

struct GroupMetrics {
  std::size_t answered = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;

  friend bool operator==(const GroupMetrics&, const GroupMetrics&) = default;
};

struct Metrics {
  std::size_t answered = 0;
  std::size_t correct = 0;
  std::size_t skipped = 0;
  double accuracy = 0.0;
  std::size_t calls = 0;
  std::map<std::string, GroupMetrics> by_tag;
  // Accuracy of every strategy that produced a choice on all answered records.
  std::map<std::string, double> strategy_accuracy;
  std::string best_strategy;
  double best_accuracy = 0.0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

Metrics compute_metrics(std::span<const EvalRecord> records);

struct EvalReport {
  std::string dataset;
  Protocol protocol = Protocol::mcp;
  std::string strategy;  // "mcp" or the cloze strategy name
  std::string shots;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<EvalRecord> records;  // sorted by id
  Metrics metrics;
  std::size_t expected_calls = 0;
  bool partial = false;
  std::string abort_reason;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// Backend calls the configured protocol costs for one question with
// `option_count` options: 1 for MCP, N for CP raw/ln, 2N for CP un and
// best_of_all (raw and ln reuse the conditional calls).
std::size_t expected_calls(Protocol protocol, ClozeStrategy strategy, std::size_t option_count);

/// Runs one evaluation over `dataset`. Terminal backend errors stop the run
/// and return a report flagged partial with the reason attached.
EvalReport run_evaluation(const EvalConfig& config, const Dataset& dataset, Backend& backend);

// Loads (and optionally samples) the dataset named by the config.
Dataset load_for_config(const EvalConfig& config);

EvalReport run_evaluation(const EvalConfig& config, Backend& backend);

// Group tag: the id prefix before the first '/', or `fallback`.
std::string tag_for(std::string_view id, std::string_view fallback);

}  // namespace mcqa
