#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "mcqa/runner.hpp"
#include "mcqa/symbol_binding.hpp"

namespace mcqa {

enum class ReportFormat { table_text, delimited, structured };

std::string_view to_string(ReportFormat format);
std::optional<ReportFormat> parse_report_format(std::string_view text);

void emit_report(const EvalReport& report, ReportFormat format, std::ostream& out);
std::string emit_report(const EvalReport& report, ReportFormat format);

// Throws std::runtime_error when the file cannot be written.
void write_report(const EvalReport& report, ReportFormat format,
                  const std::filesystem::path& path);

EvalReport parse_structured_report(std::string_view text);
EvalReport load_structured_report(const std::filesystem::path& path);

// Dataset | N | K | <shots> CP | <shots> MCP ..., one row per dataset in name
// order. Missing cells print "---".
std::string comparison_table(std::span<const EvalReport> reports);

// One row per question (id, N, orderings_used, plurality_count, ppa, sampled)
// and a closing "ALL" summary row; tab separated.
void write_ppa_table(const PpaResult& result, std::ostream& out);
std::string ppa_table(const PpaResult& result);

std::string record_json_line(const EvalRecord& record);

}  // namespace mcqa
