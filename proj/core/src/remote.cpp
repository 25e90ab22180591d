#include "mcqa/remote.hpp"

#include <algorithm>
#include <cmath>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mcqa/errors.hpp"

namespace mcqa {

using nlohmann::json;

namespace {

[[noreturn]] void protocol_error(const std::string& what, std::string_view payload) {
  throw BackendError(BackendError::Kind::protocol, what, std::string(payload));
}

const json& first_logprobs(const json& j, std::string_view payload) {
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    protocol_error("response has no choices", payload);
  const json& choice = j["choices"][0];
  if (!choice.contains("logprobs") || !choice["logprobs"].is_object())
    protocol_error("response choice has no logprobs", payload);
  return choice["logprobs"];
}

json parse_payload(std::string_view payload) {
  try {
    return json::parse(payload);
  } catch (const json::parse_error& e) {
    protocol_error(std::string("response is not JSON: ") + e.what(), payload);
  }
}

double log_sum_exp(const std::vector<double>& values) {
  const double m = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - m);
  return m + std::log(sum);
}

}  // namespace

std::string completion_request_body(const CompletionRequest& request) {
  json body = {{"model", request.model_id},
               {"prompt", request.context + request.completion},
               {"max_tokens", 0},
               {"echo", true},
               {"logprobs", 0},
               {"temperature", 0}};
  return body.dump();
}

std::string symbol_request_body(const SymbolRequest& request, int top_k) {
  json body = {{"model", request.model_id},
               {"prompt", request.context},
               {"max_tokens", 1},
               {"logprobs", top_k},
               {"temperature", 0}};
  return body.dump();
}

TokenLogProbs parse_echo_logprobs(std::string_view payload, std::size_t context_bytes,
                                  std::string_view completion) {
  const json j = parse_payload(payload);
  const json& lp = first_logprobs(j, payload);
  try {
    const auto& tokens = lp.at("tokens");
    const auto& logprobs = lp.at("token_logprobs");
    const auto& offsets = lp.at("text_offset");
    if (tokens.size() != logprobs.size() || tokens.size() != offsets.size())
      protocol_error("logprob arrays differ in length", payload);

    TokenLogProbs out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto offset = offsets[i].get<std::size_t>();
      const auto text = tokens[i].get<std::string>();
      if (offset < context_bytes) {
        if (offset + text.size() > context_bytes)
          protocol_error("token '" + text + "' straddles the context/completion boundary", payload);
        continue;
      }
      if (logprobs[i].is_null()) protocol_error("completion token has no logprob", payload);
      out.tokens.push_back({text, logprobs[i].get<double>()});
    }
    if (out.text() != completion)
      protocol_error("completion span '" + out.text() + "' does not match '" +
                         std::string(completion) + "'",
                     payload);
    return out;
  } catch (const json::exception& e) {
    protocol_error(std::string("malformed logprobs: ") + e.what(), payload);
  }
}

SymbolDistribution parse_symbol_logprobs(std::string_view payload,
                                         std::span<const std::string> candidates,
                                         SymbolSurface surface,
                                         std::optional<double> floor_logprob) {
  const json j = parse_payload(payload);
  const json& lp = first_logprobs(j, payload);
  if (!lp.contains("top_logprobs") || !lp["top_logprobs"].is_array() || lp["top_logprobs"].empty() ||
      !lp["top_logprobs"][0].is_object())
    protocol_error("response has no top_logprobs for the next token", payload);
  const json& top = lp["top_logprobs"][0];

  SymbolDistribution out;
  std::vector<std::string> missing;
  for (const auto& symbol : candidates) {
    std::vector<std::string> forms{" " + symbol};
    if (surface == SymbolSurface::either) forms.push_back(symbol);
    std::vector<double> found;
    for (const auto& form : forms) {
      if (auto it = top.find(form); it != top.end() && it->is_number())
        found.push_back(it->get<double>());
    }
    if (!found.empty()) {
      out.entries[symbol] = log_sum_exp(found);
    } else if (floor_logprob) {
      out.entries[symbol] = *floor_logprob;
      out.floored.push_back(symbol);
    } else {
      missing.push_back(symbol);
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw BackendError(BackendError::Kind::coverage, "symbols missing from top-k: " + list,
                       std::string(payload));
  }
  return out;
}

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
  const auto scheme = config_.endpoint.find("://");
  if (scheme == std::string::npos) throw ConfigError("endpoint must be an http(s) URL");
  const auto slash = config_.endpoint.find('/', scheme + 3);
  origin_ = config_.endpoint.substr(0, slash);
  path_ = slash == std::string::npos ? "/v1/completions" : config_.endpoint.substr(slash);
  if (config_.top_k < 1) throw ConfigError("top-k must be at least 1");
}

std::string RemoteBackend::post(const std::string& body) const {
  httplib::Client client(origin_);
  const auto seconds = static_cast<time_t>(config_.timeout.count());
  client.set_connection_timeout(seconds, 0);
  client.set_read_timeout(seconds, 0);
  client.set_write_timeout(seconds, 0);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  auto result = client.Post(path_, headers, body, "application/json");
  if (!result) {
    throw BackendError(BackendError::Kind::retryable,
                       "transport failure: " + httplib::to_string(result.error()));
  }
  const int status = result->status;
  if (status == 429 || status >= 500) {
    throw BackendError(BackendError::Kind::retryable, "HTTP " + std::to_string(status),
                       result->body);
  }
  if (status < 200 || status >= 300) {
    throw BackendError(BackendError::Kind::terminal, "HTTP " + std::to_string(status),
                       result->body);
  }
  return result->body;
}

TokenLogProbs RemoteBackend::completion_logprobs(const CompletionRequest& request) {
  check_request(request);
  const auto payload = post(completion_request_body(request));
  auto out = parse_echo_logprobs(payload, request.context.size(), request.completion);
  try {
    out.check();
  } catch (const ContractError& e) {
    protocol_error(e.what(), payload);
  }
  return out;
}

SymbolDistribution RemoteBackend::next_symbol_distribution(const SymbolRequest& request) {
  check_request(request);
  const auto payload = post(symbol_request_body(request, config_.top_k));
  return parse_symbol_logprobs(payload, request.candidates, config_.surface, config_.floor_logprob);
}

}  // namespace mcqa
