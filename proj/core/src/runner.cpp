#include "mcqa/runner.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <mutex>

#include "mcqa/errors.hpp"
#include "mcqa/parallel.hpp"
#include "mcqa/report.hpp"
#include "mcqa/scorer.hpp"
#include "mcqa/seed.hpp"

namespace mcqa {

std::string_view to_string(ClozeStrategy strategy) {
  switch (strategy) {
    case ClozeStrategy::raw: return "raw";
    case ClozeStrategy::ln: return "ln";
    case ClozeStrategy::un: return "un";
    case ClozeStrategy::best_of_all: return "best_of_all";
  }
  return "raw";
}

std::optional<ClozeStrategy> parse_cloze_strategy(std::string_view text) {
  if (text == "raw") return ClozeStrategy::raw;
  if (text == "ln") return ClozeStrategy::ln;
  if (text == "un") return ClozeStrategy::un;
  if (text == "best_of_all") return ClozeStrategy::best_of_all;
  return std::nullopt;
}

std::string shots_label(std::optional<std::size_t> shots) {
  return shots ? std::to_string(*shots) : "max";
}

std::optional<std::optional<std::size_t>> parse_shots(std::string_view text) {
  if (text == "max") return std::optional<std::size_t>{};
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return std::optional<std::size_t>{value};
}

void EvalConfig::check() const {
  if (token_budget == 0) throw ConfigError("token budget must be positive");
  if (workers == 0) throw ConfigError("workers must be at least 1");
  if (protocol == Protocol::cp && answer_context.empty())
    throw ConfigError("answer context must be non-empty");
  if (model_id.empty()) throw ConfigError("model id must be set");
}

std::vector<std::pair<std::string, std::string>> EvalConfig::echo() const {
  std::vector<std::pair<std::string, std::string>> out = {
      {"dataset", dataset_path.string()},
      {"exemplars", exemplar_path ? exemplar_path->string() : ""},
      {"split", std::string(to_string(split))},
      {"protocol", std::string(to_string(protocol))},
  };
  if (protocol == Protocol::cp) {
    out.emplace_back("cp_strategy", std::string(to_string(cp_strategy)));
    out.emplace_back("answer_context", answer_context);
  }
  out.emplace_back("shots", shots_label(shots));
  out.emplace_back("token_budget", std::to_string(token_budget));
  out.emplace_back("seed", std::to_string(seed));
  out.emplace_back("corruption", std::string(to_string(corruption)));
  out.emplace_back("strong_shuffle", strong_shuffle ? "true" : "false");
  out.emplace_back("sample_count", sample_count ? std::to_string(*sample_count) : "all");
  out.emplace_back("model_id", model_id);
  out.emplace_back("backend", backend_label);
  out.emplace_back("skip_over_budget", skip_over_budget ? "true" : "false");
  return out;
}

std::string tag_for(std::string_view id, std::string_view fallback) {
  const auto slash = id.find('/');
  if (slash == std::string_view::npos || slash == 0) return std::string(fallback);
  return std::string(id.substr(0, slash));
}

std::size_t expected_calls(Protocol protocol, ClozeStrategy strategy, std::size_t option_count) {
  if (protocol == Protocol::mcp) return 1;
  if (strategy == ClozeStrategy::raw || strategy == ClozeStrategy::ln) return option_count;
  return 2 * option_count;
}

Metrics compute_metrics(std::span<const EvalRecord> records) {
  Metrics m;
  std::map<std::string, std::size_t> strategy_correct;
  std::map<std::string, std::size_t> strategy_seen;
  for (const auto& r : records) {
    m.calls += r.calls;
    if (r.skipped || !r.chosen) {
      ++m.skipped;
      continue;
    }
    ++m.answered;
    auto& group = m.by_tag[r.tag];
    ++group.answered;
    if (r.correct) {
      ++m.correct;
      ++group.correct;
    }
    for (const auto& [name, choice] : r.choices) {
      ++strategy_seen[name];
      if (choice == r.gold_index) ++strategy_correct[name];
    }
  }
  auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  m.accuracy = ratio(m.correct, m.answered);
  for (auto& [tag, g] : m.by_tag) g.accuracy = ratio(g.correct, g.answered);
  for (const auto& [name, seen] : strategy_seen) {
    if (seen == m.answered) m.strategy_accuracy[name] = ratio(strategy_correct[name], seen);
  }
  bool have_best = false;
  for (std::string_view name : {"raw", "ln", "un", "mcp"}) {
    auto it = m.strategy_accuracy.find(std::string(name));
    if (it == m.strategy_accuracy.end()) continue;
    if (!have_best || it->second > m.best_accuracy) {
      m.best_strategy = it->first;
      m.best_accuracy = it->second;
      have_best = true;
    }
  }
  return m;
}

namespace {

struct QuestionOutcome {
  std::optional<EvalRecord> record;
  std::string abort_reason;
};

EvalRecord score_question(const EvalConfig& config, const Dataset& dataset, Backend& backend,
                          const Question& original) {
  EvalRecord record;
  record.id = original.id;
  record.tag = tag_for(original.id, dataset.name);
  record.option_count = original.options.size();

  Question q = original;
  try {
    if (config.strong_shuffle) q = strong_shuffle(std::move(q), derive_seed(config.seed, "strong_shuffle", q.id));
  } catch (const ContractError& e) {
    record.skipped = true;
    record.note = e.what();
    return record;
  }
  q = corrupt_options(std::move(q), {config.corruption, derive_seed(config.seed, "corruption", q.id)});
  record.gold_index = q.gold_index;

  PackingOptions packing;
  packing.token_budget = config.token_budget;
  packing.protocol = config.protocol;
  packing.seed = config.seed;
  packing.counter = [&backend](std::string_view text) { return backend.count_tokens(text); };
  std::vector<Question> exemplars;
  try {
    exemplars = select_exemplars(dataset.exemplar_pool, q, config.shots, packing);
  } catch (const OverBudgetError& e) {
    if (!config.skip_over_budget) throw;
    record.skipped = true;
    record.note = e.what();
    return record;
  }
  record.exemplar_count = exemplars.size();

  if (config.protocol == Protocol::mcp) {
    const auto binding = AnswerBinding::identity(q.options.size());
    const auto prompt = render_mcp_prompt(q, binding, bind_identity(exemplars));
    const auto distribution =
        backend.next_symbol_distribution({config.model_id, prompt.text, binding.symbols});
    ++record.calls;
    record.floor_uses = distribution.floored.size();
    auto scores = score_mcp(distribution, binding);
    record.choices["mcp"] = select_answer(scores);
    record.scores["mcp"] = std::move(scores);
    record.chosen = record.choices["mcp"];
  } else {
    const bool need_un = config.cp_strategy == ClozeStrategy::un ||
                         config.cp_strategy == ClozeStrategy::best_of_all;
    std::vector<double> raw, ln, un;
    for (std::size_t i = 0; i < q.options.size(); ++i) {
      const auto prompts = render_cp_prompts(q, i, exemplars, config.answer_context);
      const auto& completion = *prompts.conditional.completion;
      const auto conditional =
          backend.completion_logprobs({config.model_id, prompts.conditional.text, completion});
      ++record.calls;
      ClozeScore score;
      if (need_un) {
        const auto unconditional =
            backend.completion_logprobs({config.model_id, prompts.unconditional.text, completion});
        ++record.calls;
        score = score_cloze(conditional, unconditional);
        un.push_back(*score.un);
      } else {
        score = score_cloze(conditional);
      }
      raw.push_back(score.raw);
      ln.push_back(score.ln);
    }
    record.choices["raw"] = select_answer(raw);
    record.choices["ln"] = select_answer(ln);
    record.scores["raw"] = std::move(raw);
    record.scores["ln"] = std::move(ln);
    if (need_un) {
      record.choices["un"] = select_answer(un);
      record.scores["un"] = std::move(un);
    }
    // best_of_all is provisionally raw until the winning strategy is known.
    const auto strategy = config.cp_strategy == ClozeStrategy::best_of_all
                              ? std::string("raw")
                              : std::string(to_string(config.cp_strategy));
    record.chosen = record.choices.at(strategy);
  }
  if (record.chosen) record.correct = *record.chosen == record.gold_index;
  return record;
}

}  // namespace

EvalReport run_evaluation(const EvalConfig& config, const Dataset& dataset, Backend& backend) {
  config.check();
  EvalReport report;
  report.dataset = dataset.name;
  report.protocol = config.protocol;
  report.strategy = config.protocol == Protocol::mcp ? "mcp" : std::string(to_string(config.cp_strategy));
  report.shots = shots_label(config.shots);
  report.config = config.echo();

  std::ofstream partial;
  if (config.partial_path) {
    partial.open(*config.partial_path, std::ios::binary | std::ios::trunc);
    if (!partial) throw std::runtime_error("cannot write " + config.partial_path->string());
  }
  std::mutex partial_mutex;

  const auto& questions = dataset.questions;
  std::vector<QuestionOutcome> outcomes(questions.size());
  std::atomic<bool> stop{false};

  parallel_for(questions.size(), config.workers, [&](std::size_t i) {
    if (stop) return;
    try {
      outcomes[i].record = score_question(config, dataset, backend, questions[i]);
    } catch (const BackendError& e) {
      outcomes[i].abort_reason = questions[i].id + ": " + e.what();
      stop = true;
      return;
    }
    if (partial.is_open()) {
      std::lock_guard lock(partial_mutex);
      partial << record_json_line(*outcomes[i].record) << '\n';
      partial.flush();
    }
  });

  for (auto& outcome : outcomes) {
    if (outcome.record) report.records.push_back(std::move(*outcome.record));
    if (!outcome.abort_reason.empty() && report.abort_reason.empty()) {
      report.partial = true;
      report.abort_reason = outcome.abort_reason;
    }
  }
  std::sort(report.records.begin(), report.records.end(),
            [](const EvalRecord& a, const EvalRecord& b) { return a.id < b.id; });

  report.metrics = compute_metrics(report.records);
  if (config.protocol == Protocol::cp && config.cp_strategy == ClozeStrategy::best_of_all &&
      !report.metrics.best_strategy.empty()) {
    for (auto& r : report.records) {
      if (r.skipped) continue;
      r.chosen = r.choices.at(report.metrics.best_strategy);
      r.correct = *r.chosen == r.gold_index;
    }
    report.metrics = compute_metrics(report.records);
  }
  for (const auto& r : report.records) {
    if (!r.skipped) report.expected_calls += expected_calls(config.protocol, config.cp_strategy, r.option_count);
  }
  return report;
}

Dataset load_for_config(const EvalConfig& config) {
  auto dataset = load_dataset(config.dataset_path, config.split, config.exemplar_path);
  if (config.sample_count)
    dataset = sample_instances(dataset, *config.sample_count, derive_seed(config.seed, "downsample"));
  return dataset;
}

EvalReport run_evaluation(const EvalConfig& config, Backend& backend) {
  return run_evaluation(config, load_for_config(config), backend);
}

}  // namespace mcqa
