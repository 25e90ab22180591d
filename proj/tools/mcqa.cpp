// mcqa: evaluate language models on multiple-choice QA with cloze and
// multiple-choice prompting, and measure answer-order agreement (PPA).

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mcqa/dispatch.hpp"
#include "mcqa/errors.hpp"
#include "mcqa/mock.hpp"
#include "mcqa/remote.hpp"
#include "mcqa/report.hpp"
#include "mcqa/runner.hpp"
#include "mcqa/seed.hpp"
#include "mcqa/symbol_binding.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kDataError = 3,
  kBackendError = 4,
};

struct BackendFlags {
  std::string backend = "mock:uniform";
  std::string model = "mock";
  std::string endpoint;
  double rpm = 20.0;
  std::size_t max_in_flight = 4;
  int top_k = 5;
  std::string floor = "-100";
  std::string surface = "leading_space";
  std::string cache_dir;
};

void add_backend_flags(CLI::App* app, BackendFlags& flags) {
  app->add_option("--backend", flags.backend,
                  "mock:<uniform|first_symbol_biased|order_invariant_oracle|seeded_hash|"
                  "length_biased>[:seed] or remote")
      ->capture_default_str();
  app->add_option("--model", flags.model, "model id sent with every request")->capture_default_str();
  app->add_option("--endpoint", flags.endpoint, "completions endpoint URL for the remote backend");
  app->add_option("--rpm", flags.rpm, "requests per minute")->capture_default_str();
  app->add_option("--max-in-flight", flags.max_in_flight, "concurrent remote requests")
      ->capture_default_str();
  app->add_option("--top-k", flags.top_k, "top-k alternatives requested for symbol scoring")
      ->capture_default_str();
  app->add_option("--floor", flags.floor, "logprob for symbols missing from top-k, or 'none'")
      ->capture_default_str();
  app->add_option("--symbol-surface", flags.surface, "leading_space or either")
      ->capture_default_str();
  app->add_option("--cache-dir", flags.cache_dir, "content-addressed response cache directory");
}

// Owns the backend stack: base model, optional dispatcher in front of it.
struct BackendStack {
  std::unique_ptr<mcqa::Backend> base;
  std::unique_ptr<mcqa::Dispatcher> dispatcher;

  mcqa::Backend& front() { return dispatcher ? *dispatcher : *base; }
};

BackendStack make_backend(const BackendFlags& flags, const mcqa::Dataset& dataset) {
  BackendStack stack;
  bool remote = false;
  if (flags.backend == "remote") {
    if (flags.endpoint.empty()) throw mcqa::ConfigError("--endpoint is required for the remote backend");
    mcqa::RemoteConfig config;
    config.endpoint = flags.endpoint;
    if (const char* key = std::getenv(std::string(mcqa::kApiKeyEnv).c_str())) config.api_key = key;
    config.top_k = flags.top_k;
    if (flags.floor == "none") {
      config.floor_logprob.reset();
    } else {
      try {
        config.floor_logprob = std::stod(flags.floor);
      } catch (const std::exception&) {
        throw mcqa::ConfigError("--floor must be a number or 'none'");
      }
    }
    if (flags.surface == "either") config.surface = mcqa::SymbolSurface::either;
    else if (flags.surface != "leading_space") throw mcqa::ConfigError("unknown --symbol-surface");
    stack.base = std::make_unique<mcqa::RemoteBackend>(std::move(config));
    remote = true;
  } else if (flags.backend.starts_with("mock:")) {
    std::string rest = flags.backend.substr(5);
    std::string seed_text;
    if (auto colon = rest.find(':'); colon != std::string::npos) {
      seed_text = rest.substr(colon + 1);
      rest = rest.substr(0, colon);
    }
    if (rest == "oracle") rest = "order_invariant_oracle";
    auto kind = mcqa::parse_mock_kind(rest);
    if (!kind) throw mcqa::ConfigError("unknown mock backend '" + rest + "'");
    mcqa::MockModelSpec spec;
    if (*kind == mcqa::MockModelSpec::Kind::order_invariant_oracle)
      spec = mcqa::MockModelSpec::oracle_for(dataset.questions);
    spec.kind = *kind;
    if (!seed_text.empty()) {
      try {
        spec.seed = std::stoull(seed_text);
      } catch (const std::exception&) {
        throw mcqa::ConfigError("mock seed must be an integer");
      }
    }
    stack.base = std::make_unique<mcqa::MockBackend>(std::move(spec));
  } else {
    throw mcqa::ConfigError("unknown backend '" + flags.backend + "'");
  }

  if (remote || !flags.cache_dir.empty()) {
    mcqa::DispatchOptions options;
    options.requests_per_minute = flags.rpm;
    options.max_in_flight = flags.max_in_flight;
    if (!flags.cache_dir.empty()) options.cache_dir = flags.cache_dir;
    stack.dispatcher = std::make_unique<mcqa::Dispatcher>(*stack.base, std::move(options));
  }
  return stack;
}

struct CommonFlags {
  std::string dataset;
  std::string exemplars;
  std::string split = "test";
  std::string shots = "0";
  std::size_t budget = 4000;
  std::uint64_t seed = 0;
  std::optional<std::size_t> sample;
  std::size_t workers = 1;
  std::string out;
  std::string format = "json";
};

void add_common_flags(CLI::App* app, CommonFlags& flags) {
  app->add_option("--dataset", flags.dataset, "canonical JSONL dataset")->required();
  app->add_option("--exemplars", flags.exemplars, "canonical JSONL exemplar pool");
  app->add_option("--split", flags.split, "train, validation or test")->capture_default_str();
  app->add_option("--shots", flags.shots, "exemplar count K, or 'max' to pack the token budget")
      ->capture_default_str();
  app->add_option("--budget", flags.budget, "prompt token budget")->capture_default_str();
  app->add_option("--seed", flags.seed, "seed for sampling, shuffles and corruptions")
      ->capture_default_str();
  app->add_option("--sample", flags.sample, "evaluate a seeded sample of this many questions");
  app->add_option("--workers", flags.workers, "questions evaluated concurrently")
      ->capture_default_str();
  app->add_option("--out", flags.out, "output file (stdout when omitted)");
}

mcqa::EvalConfig base_config(const CommonFlags& flags) {
  mcqa::EvalConfig config;
  config.dataset_path = flags.dataset;
  if (!flags.exemplars.empty()) config.exemplar_path = flags.exemplars;
  auto split = mcqa::parse_split(flags.split);
  if (!split) throw mcqa::ConfigError("unknown --split '" + flags.split + "'");
  config.split = *split;
  auto shots = mcqa::parse_shots(flags.shots);
  if (!shots) throw mcqa::ConfigError("--shots must be a non-negative integer or 'max'");
  config.shots = *shots;
  config.token_budget = flags.budget;
  config.seed = flags.seed;
  config.sample_count = flags.sample;
  config.workers = flags.workers;
  return config;
}

template <typename Emit>
void write_output(const std::string& path, Emit&& emit) {
  if (path.empty()) {
    emit(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  emit(out);
}

int run_eval(const CommonFlags& common, const BackendFlags& backend_flags,
             const std::string& protocol, const std::string& strategy,
             const std::string& corruption, bool strong_shuffle, const std::string& answer_context,
             const std::string& partial, bool fail_over_budget) {
  auto config = base_config(common);
  auto p = mcqa::parse_protocol(protocol);
  if (!p) throw mcqa::ConfigError("unknown --protocol '" + protocol + "'");
  config.protocol = *p;
  auto s = mcqa::parse_cloze_strategy(strategy);
  if (!s) throw mcqa::ConfigError("unknown --strategy '" + strategy + "'");
  config.cp_strategy = *s;
  auto c = mcqa::parse_corruption(corruption);
  if (!c) throw mcqa::ConfigError("unknown --corruption '" + corruption + "'");
  config.corruption = *c;
  config.strong_shuffle = strong_shuffle;
  config.answer_context = answer_context;
  config.skip_over_budget = !fail_over_budget;
  if (!partial.empty()) config.partial_path = partial;
  config.model_id = backend_flags.model;
  config.backend_label = backend_flags.backend;
  auto format = mcqa::parse_report_format(common.format);
  if (!format) throw mcqa::ConfigError("unknown --format '" + common.format + "'");
  config.check();

  const auto dataset = mcqa::load_for_config(config);
  auto stack = make_backend(backend_flags, dataset);
  const auto report = mcqa::run_evaluation(config, dataset, stack.front());
  write_output(common.out, [&](std::ostream& out) { mcqa::emit_report(report, *format, out); });

  std::cerr << report.dataset << ' ' << report.strategy << " shots=" << report.shots
            << " accuracy=" << report.metrics.accuracy << " answered=" << report.metrics.answered
            << " skipped=" << report.metrics.skipped << " calls=" << report.metrics.calls;
  if (stack.dispatcher)
    std::cerr << " remote=" << stack.dispatcher->remote_dispatches()
              << " cache_hits=" << stack.dispatcher->cache_hits();
  std::cerr << '\n';
  if (report.partial) {
    std::cerr << "aborted: " << report.abort_reason << '\n';
    return kBackendError;
  }
  return kOk;
}

int run_ppa(const CommonFlags& common, const BackendFlags& backend_flags, std::size_t cap,
            bool skip_errors) {
  auto config = base_config(common);
  config.protocol = mcqa::Protocol::mcp;
  config.model_id = backend_flags.model;
  config.check();
  const auto dataset = mcqa::load_for_config(config);
  if (dataset.questions.empty()) throw mcqa::ConfigError("dataset has no questions");
  auto stack = make_backend(backend_flags, dataset);

  mcqa::PpaOptions options;
  options.model_id = backend_flags.model;
  options.cap = cap;
  options.seed = common.seed;
  options.shots = config.shots;
  options.token_budget = common.budget;
  options.skip_on_error = skip_errors;
  options.workers = common.workers;
  const auto result = mcqa::ppa_for_dataset(dataset, stack.front(), options);
  write_output(common.out, [&](std::ostream& out) { mcqa::write_ppa_table(result, out); });
  std::cerr << dataset.name << " ppa=" << result.dataset_ppa
            << " questions=" << result.per_question.size() << " skipped=" << result.skipped.size()
            << " calls=" << result.backend_calls << (result.sampled ? " (orderings sampled)" : "")
            << '\n';
  return kOk;
}

int run_validate(const std::string& dataset_path, const std::string& exemplars) {
  std::optional<std::filesystem::path> pool;
  if (!exemplars.empty()) pool = exemplars;
  const auto dataset = mcqa::load_dataset(dataset_path, mcqa::Split::test, pool);
  const auto report = mcqa::validate_dataset(dataset);
  std::cout << dataset.name << ": " << dataset.questions.size() << " questions, "
            << dataset.exemplar_pool.size() << " exemplars\n";
  for (const auto& [n, count] : report.option_histogram)
    std::cout << "  N=" << n << ": " << count << '\n';
  for (const auto& f : report.findings)
    std::cout << mcqa::to_string(f.kind) << '\t' << f.question_id << '\t' << f.detail << '\n';
  std::cout << (report.ok() ? "ok" : std::to_string(report.findings.size()) + " finding(s)") << '\n';
  return report.ok() ? kOk : kDataError;
}

struct ImportFlags {
  std::string input;
  std::string output;
  std::string id_key = "id";
  std::string stem_key = "question";
  std::string options_key = "options";
  std::vector<std::string> option_keys;
  std::string gold_key = "answer";
  std::string passage_key;
  std::string passage_kind = "passage";
  std::string id_prefix;
};

std::size_t resolve_gold(const nlohmann::json& value, const std::vector<std::string>& options) {
  if (value.is_number_integer()) return value.get<std::size_t>();
  if (value.is_string()) {
    const auto text = value.get<std::string>();
    if (text.size() == 1 && text[0] >= 'A' && text[0] <= 'Z') return static_cast<std::size_t>(text[0] - 'A');
    if (!text.empty() && std::all_of(text.begin(), text.end(), ::isdigit)) return std::stoul(text);
    for (std::size_t i = 0; i < options.size(); ++i) {
      if (options[i] == text) return i;
    }
  }
  throw std::runtime_error("cannot resolve gold answer " + value.dump());
}

int run_import(const ImportFlags& flags) {
  std::ifstream in(flags.input, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + flags.input);
  auto kind = mcqa::parse_passage_kind(flags.passage_kind);
  if (!kind) throw mcqa::ConfigError("unknown --passage-kind");

  std::vector<mcqa::Question> questions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      mcqa::Question q;
      if (j.contains(flags.id_key)) {
        const auto& id = j.at(flags.id_key);
        q.id = id.is_string() ? id.get<std::string>() : id.dump();
      } else {
        q.id = std::to_string(line_no);
      }
      q.id = flags.id_prefix + q.id;
      q.stem = j.at(flags.stem_key).get<std::string>();
      if (!flags.option_keys.empty()) {
        for (const auto& key : flags.option_keys) q.options.push_back(j.at(key).get<std::string>());
      } else {
        q.options = j.at(flags.options_key).get<std::vector<std::string>>();
      }
      q.gold_index = resolve_gold(j.at(flags.gold_key), q.options);
      if (!flags.passage_key.empty() && j.contains(flags.passage_key)) {
        q.passage = j.at(flags.passage_key).get<std::string>();
        q.passage_kind = *kind == mcqa::PassageKind::none ? mcqa::PassageKind::passage : *kind;
      }
      auto violations = q.invariant_violations();
      if (!violations.empty()) throw std::runtime_error(violations.front());
      questions.push_back(std::move(q));
    } catch (const std::exception& e) {
      throw mcqa::ParseError("", line_no, e.what());
    }
  }
  write_output(flags.output, [&](std::ostream& out) { mcqa::write_questions(out, questions); });
  std::cerr << "imported " << questions.size() << " questions\n";
  return kOk;
}

int run_table(const std::vector<std::string>& paths, const std::string& out_path) {
  std::vector<mcqa::EvalReport> reports;
  for (const auto& p : paths) reports.push_back(mcqa::load_structured_report(p));
  write_output(out_path, [&](std::ostream& out) { out << mcqa::comparison_table(reports); });
  return kOk;
}

// Replaces `--config FILE` with the file's `key = value` entries as flags
// placed right after the subcommand, so later command-line flags win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  for (std::size_t i = 2; i < args.size(); ++i) {
    std::string path;
    std::size_t used = 0;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      used = 2;
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      used = 1;
    } else {
      continue;
    }
    std::ifstream in(path);
    if (!in) throw mcqa::ConfigError("cannot open config file " + path);
    std::vector<std::string> injected;
    for (const auto& item : CLI::ConfigTOML().from_config(in)) {
      if (!item.parents.empty() || item.name == "++" || item.name == "--")
        throw mcqa::ConfigError("config file " + path + " must be flat key = value lines");
      for (const auto& value : item.inputs) injected.push_back("--" + item.name + "=" + value);
    }
    args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
               args.begin() + static_cast<std::ptrdiff_t>(i + used));
    args.insert(args.begin() + 2, injected.begin(), injected.end());
    break;
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiple-choice QA evaluation with cloze and multiple-choice prompting"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mcqa 0.1.0");

  CommonFlags eval_common;
  BackendFlags eval_backend;
  std::string protocol = "mcp", strategy = "best_of_all", corruption = "none";
  std::string answer_context(mcqa::kDefaultAnswerContext);
  std::string partial;
  bool strong = false, fail_over_budget = false;
  auto* eval = app.add_subcommand("eval", "evaluate accuracy under one protocol");
  eval->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  eval->add_option("--config", "flat key = value config file; flags override it")
      ->type_name("FILE")
      ->expected(1);
  add_common_flags(eval, eval_common);
  add_backend_flags(eval, eval_backend);
  eval->add_option("--protocol", protocol, "mcp or cp")->capture_default_str();
  eval->add_option("--strategy", strategy, "cloze strategy: raw, ln, un or best_of_all")
      ->capture_default_str();
  eval->add_option("--corruption", corruption, "none, caps or space")->capture_default_str();
  eval->add_flag("--strong-shuffle", strong, "move every gold answer to a new position");
  eval->add_option("--answer-context", answer_context, "unconditional context for UN scoring")
      ->capture_default_str();
  eval->add_option("--partial", partial, "append finished records to this JSONL file");
  eval->add_flag("--fail-over-budget", fail_over_budget,
                 "abort instead of skipping questions that exceed the token budget");
  eval->add_option("--format", eval_common.format, "json, tsv or table")->capture_default_str();

  CommonFlags ppa_common;
  BackendFlags ppa_backend;
  std::size_t cap = mcqa::kDefaultOrderingCap;
  bool skip_errors = false;
  auto* ppa = app.add_subcommand("ppa", "proportion of plurality agreement over answer orderings");
  ppa->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  ppa->add_option("--config", "flat key = value config file; flags override it")
      ->type_name("FILE")
      ->expected(1);
  add_common_flags(ppa, ppa_common);
  add_backend_flags(ppa, ppa_backend);
  ppa->add_option("--cap", cap, "orderings per question before sampling")->capture_default_str();
  ppa->add_flag("--skip-errors", skip_errors, "record failing questions as skipped");

  std::string validate_path, validate_pool;
  auto* validate = app.add_subcommand("validate", "check dataset invariants");
  validate->add_option("--dataset", validate_path, "canonical JSONL dataset")->required();
  validate->add_option("--exemplars", validate_pool, "canonical JSONL exemplar pool");

  ImportFlags import_flags;
  auto* import = app.add_subcommand("import", "convert a JSONL dataset to the canonical format");
  import->add_option("--input", import_flags.input, "source JSONL")->required();
  import->add_option("--output", import_flags.output, "canonical JSONL (stdout when omitted)");
  import->add_option("--id-key", import_flags.id_key)->capture_default_str();
  import->add_option("--stem-key", import_flags.stem_key)->capture_default_str();
  import->add_option("--options-key", import_flags.options_key, "array of option strings")
      ->capture_default_str();
  import->add_option("--option-keys", import_flags.option_keys, "one key per option, in order")
      ->delimiter(',');
  import->add_option("--gold-key", import_flags.gold_key,
                     "index, letter, or option text of the answer")
      ->capture_default_str();
  import->add_option("--passage-key", import_flags.passage_key);
  import->add_option("--passage-kind", import_flags.passage_kind, "passage, story or dialogue")
      ->capture_default_str();
  import->add_option("--id-prefix", import_flags.id_prefix, "prepended to every id, e.g. 'anatomy/'");

  std::vector<std::string> table_inputs;
  std::string table_out;
  auto* table = app.add_subcommand("table", "comparison table from structured reports");
  table->add_option("reports", table_inputs, "structured report files")->required();
  table->add_option("--out", table_out, "output file (stdout when omitted)");

  std::vector<std::string> args(argv, argv + argc);
  try {
    args = expand_config(std::move(args));
  } catch (const mcqa::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  args.erase(args.begin());
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*eval)
      return run_eval(eval_common, eval_backend, protocol, strategy, corruption, strong,
                      answer_context, partial, fail_over_budget);
    if (*ppa) return run_ppa(ppa_common, ppa_backend, cap, skip_errors);
    if (*validate) return run_validate(validate_path, validate_pool);
    if (*import) return run_import(import_flags);
    if (*table) return run_table(table_inputs, table_out);
  } catch (const mcqa::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const mcqa::ParseError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const mcqa::OverBudgetError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const mcqa::BackendError& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    for (const auto& line : e.attempt_log()) std::cerr << "  " << line << '\n';
    return kBackendError;
  } catch (const mcqa::ContractError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}
