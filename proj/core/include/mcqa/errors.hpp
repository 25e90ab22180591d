#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcqa {

// Violated precondition on an in-process call (wrong lengths, bad index, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed dataset record. `line` is 1-based; `record_id` may be empty when
// the id itself could not be read.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string record_id, std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) +
                           (record_id.empty() ? "" : " (id " + record_id + ")") +
                           ": " + what),
        record_id_(std::move(record_id)),
        line_(line) {}

  const std::string& record_id() const noexcept { return record_id_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string record_id_;
  std::size_t line_;
};

class OverBudgetError : public std::runtime_error {
 public:
  OverBudgetError(std::string question_id, std::size_t tokens, std::size_t budget)
      : std::runtime_error("question " + question_id + " needs " +
                           std::to_string(tokens) + " tokens; budget is " +
                           std::to_string(budget)),
        question_id_(std::move(question_id)) {}

  const std::string& question_id() const noexcept { return question_id_; }

 private:
  std::string question_id_;
};

class BackendError : public std::runtime_error {
 public:
  enum class Kind {
    retryable,  // transport failure, 429, 5xx
    terminal,   // refusal, or retries exhausted
    protocol,   // payload did not match the request
    coverage,   // candidate symbols missing from top-k with no floor
  };

  BackendError(Kind kind, const std::string& what, std::string raw_payload = {},
               std::vector<std::string> attempt_log = {})
      : std::runtime_error(what),
        kind_(kind),
        raw_payload_(std::move(raw_payload)),
        attempt_log_(std::move(attempt_log)) {}

  Kind kind() const noexcept { return kind_; }
  bool retryable() const noexcept { return kind_ == Kind::retryable; }
  const std::string& raw_payload() const noexcept { return raw_payload_; }
  const std::vector<std::string>& attempt_log() const noexcept { return attempt_log_; }

 private:
  Kind kind_;
  std::string raw_payload_;
  std::vector<std::string> attempt_log_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mcqa
