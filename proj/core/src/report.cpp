#include "mcqa/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mcqa {

using nlohmann::json;

std::string_view to_string(ReportFormat format) {
  switch (format) {
    case ReportFormat::table_text: return "table";
    case ReportFormat::delimited: return "tsv";
    case ReportFormat::structured: return "json";
  }
  return "json";
}

std::optional<ReportFormat> parse_report_format(std::string_view text) {
  if (text == "table" || text == "table_text") return ReportFormat::table_text;
  if (text == "tsv" || text == "delimited") return ReportFormat::delimited;
  if (text == "json" || text == "structured") return ReportFormat::structured;
  return std::nullopt;
}

namespace {

json record_to_json(const EvalRecord& r) {
  return {{"id", r.id},
          {"tag", r.tag},
          {"option_count", r.option_count},
          {"exemplar_count", r.exemplar_count},
          {"gold_index", r.gold_index},
          {"chosen", r.chosen ? json(*r.chosen) : json(nullptr)},
          {"correct", r.correct},
          {"skipped", r.skipped},
          {"note", r.note},
          {"calls", r.calls},
          {"floor_uses", r.floor_uses},
          {"scores", r.scores},
          {"choices", r.choices}};
}

EvalRecord record_from_json(const json& j) {
  EvalRecord r;
  r.id = j.at("id").get<std::string>();
  r.tag = j.at("tag").get<std::string>();
  r.option_count = j.at("option_count").get<std::size_t>();
  r.exemplar_count = j.at("exemplar_count").get<std::size_t>();
  r.gold_index = j.at("gold_index").get<std::size_t>();
  if (!j.at("chosen").is_null()) r.chosen = j.at("chosen").get<std::size_t>();
  r.correct = j.at("correct").get<bool>();
  r.skipped = j.at("skipped").get<bool>();
  r.note = j.at("note").get<std::string>();
  r.calls = j.at("calls").get<std::size_t>();
  r.floor_uses = j.at("floor_uses").get<std::size_t>();
  r.scores = j.at("scores").get<std::map<std::string, std::vector<double>>>();
  r.choices = j.at("choices").get<std::map<std::string, std::size_t>>();
  return r;
}

json metrics_to_json(const Metrics& m) {
  json by_tag = json::object();
  for (const auto& [tag, g] : m.by_tag)
    by_tag[tag] = {{"answered", g.answered}, {"correct", g.correct}, {"accuracy", g.accuracy}};
  return {{"answered", m.answered},
          {"correct", m.correct},
          {"skipped", m.skipped},
          {"accuracy", m.accuracy},
          {"calls", m.calls},
          {"by_tag", by_tag},
          {"strategy_accuracy", m.strategy_accuracy},
          {"best_strategy", m.best_strategy},
          {"best_accuracy", m.best_accuracy}};
}

Metrics metrics_from_json(const json& j) {
  Metrics m;
  m.answered = j.at("answered").get<std::size_t>();
  m.correct = j.at("correct").get<std::size_t>();
  m.skipped = j.at("skipped").get<std::size_t>();
  m.accuracy = j.at("accuracy").get<double>();
  m.calls = j.at("calls").get<std::size_t>();
  for (const auto& [tag, g] : j.at("by_tag").items()) {
    m.by_tag[tag] = {g.at("answered").get<std::size_t>(), g.at("correct").get<std::size_t>(),
                     g.at("accuracy").get<double>()};
  }
  m.strategy_accuracy = j.at("strategy_accuracy").get<std::map<std::string, double>>();
  m.best_strategy = j.at("best_strategy").get<std::string>();
  m.best_accuracy = j.at("best_accuracy").get<double>();
  return m;
}

json report_to_json(const EvalReport& report) {
  json config = json::array();
  for (const auto& [k, v] : report.config) config.push_back({k, v});
  json records = json::array();
  for (const auto& r : report.records) records.push_back(record_to_json(r));
  return {{"dataset", report.dataset},
          {"protocol", std::string(to_string(report.protocol))},
          {"strategy", report.strategy},
          {"shots", report.shots},
          {"config", config},
          {"records", records},
          {"metrics", metrics_to_json(report.metrics)},
          {"expected_calls", report.expected_calls},
          {"partial", report.partial},
          {"abort_reason", report.abort_reason}};
}

std::string percent(double accuracy) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.1f", 100.0 * accuracy);
  return buffer;
}

// Numeric shot counts ascending, then "max".
bool shots_before(const std::string& a, const std::string& b) {
  if (a == b) return false;
  if (a == "max") return false;
  if (b == "max") return true;
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string line;
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      if (c > 0) line += "  ";
      line += rows[r][c];
      if (c + 1 < rows[r].size()) line.append(width[c] - rows[r][c].size(), ' ');
    }
    out += line;
    out += '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c > 0 ? 2 : 0);
      out.append(total, '-');
      out += '\n';
    }
  }
  return out;
}

}  // namespace

std::string record_json_line(const EvalRecord& record) { return record_to_json(record).dump(); }

std::string comparison_table(std::span<const EvalReport> reports) {
  std::set<std::string, decltype(&shots_before)> shots(&shots_before);
  std::map<std::string, std::vector<const EvalReport*>> by_dataset;
  for (const auto& r : reports) {
    shots.insert(r.shots);
    by_dataset[r.dataset].push_back(&r);
  }

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header = {"Dataset", "N", "K"};
  for (const auto& s : shots) {
    header.push_back(s + " CP");
    header.push_back(s + " MCP");
  }
  rows.push_back(header);

  for (const auto& [name, list] : by_dataset) {
    std::map<std::size_t, std::size_t> n_hist;
    std::size_t k = 0;
    std::map<std::pair<std::string, Protocol>, const EvalReport*> cell;
    for (const auto* r : list) {
      if (r->metrics.answered == 0) continue;
      std::optional<std::size_t> min_k;
      for (const auto& rec : r->records) {
        if (rec.skipped) continue;
        ++n_hist[rec.option_count];
        min_k = std::min(min_k.value_or(rec.exemplar_count), rec.exemplar_count);
      }
      k = std::max(k, min_k.value_or(0));
      cell[{r->shots, r->protocol}] = r;
    }
    if (cell.empty()) continue;
    std::size_t n = 0, best = 0;
    for (const auto& [count, freq] : n_hist) {
      if (freq > best) {
        best = freq;
        n = count;
      }
    }
    std::vector<std::string> row = {name, std::to_string(n), std::to_string(k)};
    for (const auto& s : shots) {
      for (auto protocol : {Protocol::cp, Protocol::mcp}) {
        auto it = cell.find({s, protocol});
        if (it == cell.end()) {
          row.emplace_back("---");
        } else {
          row.push_back(percent(it->second->metrics.accuracy) + (it->second->partial ? "*" : ""));
        }
      }
    }
    rows.push_back(std::move(row));
  }
  return render_table(rows);
}

void emit_report(const EvalReport& report, ReportFormat format, std::ostream& out) {
  switch (format) {
    case ReportFormat::structured:
      out << report_to_json(report).dump(2) << '\n';
      return;
    case ReportFormat::table_text:
      out << comparison_table(std::span<const EvalReport>(&report, 1));
      return;
    case ReportFormat::delimited:
      out << "id\ttag\tN\tK\tgold\tchosen\tcorrect\tskipped\tcalls\tnote\n";
      for (const auto& r : report.records) {
        out << r.id << '\t' << r.tag << '\t' << r.option_count << '\t' << r.exemplar_count << '\t'
            << r.gold_index << '\t' << (r.chosen ? std::to_string(*r.chosen) : "") << '\t'
            << (r.correct ? 1 : 0) << '\t' << (r.skipped ? 1 : 0) << '\t' << r.calls << '\t'
            << r.note << '\n';
      }
      return;
  }
}

std::string emit_report(const EvalReport& report, ReportFormat format) {
  std::ostringstream out;
  emit_report(report, format, out);
  return out.str();
}

void write_report(const EvalReport& report, ReportFormat format, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  emit_report(report, format, out);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

EvalReport parse_structured_report(std::string_view text) {
  const json j = json::parse(text);
  EvalReport report;
  report.dataset = j.at("dataset").get<std::string>();
  const auto protocol = parse_protocol(j.at("protocol").get<std::string>());
  if (!protocol) throw std::runtime_error("unknown protocol in report");
  report.protocol = *protocol;
  report.strategy = j.at("strategy").get<std::string>();
  report.shots = j.at("shots").get<std::string>();
  for (const auto& kv : j.at("config"))
    report.config.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
  for (const auto& r : j.at("records")) report.records.push_back(record_from_json(r));
  report.metrics = metrics_from_json(j.at("metrics"));
  report.expected_calls = j.at("expected_calls").get<std::size_t>();
  report.partial = j.at("partial").get<bool>();
  report.abort_reason = j.at("abort_reason").get<std::string>();
  return report;
}

EvalReport load_structured_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_structured_report(buffer.str());
}

void write_ppa_table(const PpaResult& result, std::ostream& out) {
  char ppa[32];
  out << "id\tN\torderings_used\tplurality_count\tppa\tsampled\n";
  std::size_t orderings = 0, plurality = 0;
  for (const auto& e : result.per_question) {
    std::snprintf(ppa, sizeof ppa, "%.6f", e.ppa);
    out << e.id << '\t' << e.option_count << '\t' << e.orderings_used << '\t' << e.plurality_count
        << '\t' << ppa << '\t' << (e.sampled ? "yes" : "no") << '\n';
    orderings += e.orderings_used;
    plurality += e.plurality_count;
  }
  std::snprintf(ppa, sizeof ppa, "%.6f", result.dataset_ppa);
  out << "ALL\t-\t" << orderings << '\t' << plurality << '\t' << ppa << '\t'
      << (result.sampled ? "yes" : "no") << '\n';
  for (const auto& s : result.skipped) out << "# skipped " << s.id << ": " << s.reason << '\n';
}

std::string ppa_table(const PpaResult& result) {
  std::ostringstream out;
  write_ppa_table(result, out);
  return out.str();
}

}  // namespace mcqa
