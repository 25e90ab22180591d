#include "mcqa/cache.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "mcqa/errors.hpp"

namespace mcqa {

using nlohmann::json;

namespace {

std::size_t fnv_stripe(std::string_view key) {
  return std::hash<std::string_view>{}(key) % ResponseCache::kStripes;
}

}  // namespace

std::string canonical_request(const CompletionRequest& request) {
  // nlohmann::json objects keep keys sorted, so dump() is canonical.
  json j = {{"model_id", request.model_id},
            {"mode", "completion_logprobs"},
            {"context", request.context},
            {"completion", request.completion}};
  return j.dump();
}

std::string canonical_request(const SymbolRequest& request) {
  json j = {{"model_id", request.model_id},
            {"mode", "symbol_distribution"},
            {"context", request.context},
            {"candidates", request.candidates}};
  return j.dump();
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0x0f];
  }
  return out;
}

std::string cache_key(const CompletionRequest& request) {
  return sha256_hex(canonical_request(request));
}

std::string cache_key(const SymbolRequest& request) {
  return sha256_hex(canonical_request(request));
}

std::string serialize_response(const TokenLogProbs& response) {
  json tokens = json::array();
  for (const auto& t : response.tokens) tokens.push_back({{"text", t.text}, {"logprob", t.logprob}});
  return json{{"tokens", tokens}}.dump();
}

std::string serialize_response(const SymbolDistribution& response) {
  return json{{"entries", response.entries}, {"floored", response.floored}}.dump();
}

TokenLogProbs parse_token_logprobs(std::string_view text) {
  const json j = json::parse(text);
  TokenLogProbs out;
  for (const auto& t : j.at("tokens"))
    out.tokens.push_back({t.at("text").get<std::string>(), t.at("logprob").get<double>()});
  return out;
}

SymbolDistribution parse_symbol_distribution(std::string_view text) {
  const json j = json::parse(text);
  SymbolDistribution out;
  out.entries = j.at("entries").get<std::map<std::string, double>>();
  out.floored = j.at("floored").get<std::vector<std::string>>();
  return out;
}

ResponseCache::ResponseCache(std::filesystem::path directory) : directory_(std::move(directory)) {
  std::filesystem::create_directories(directory_);
}

std::filesystem::path ResponseCache::path_for(std::string_view key) const {
  return directory_ / (std::string(key) + ".json");
}

std::optional<std::string> ResponseCache::read_response(const std::string& key) const {
  std::lock_guard lock(stripes_[fnv_stripe(key)]);
  std::ifstream in(path_for(key), std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    const json entry = json::parse(buffer.str());
    return entry.at("response").dump();
  } catch (const json::exception&) {
    // A torn or foreign file counts as a miss and is overwritten on store.
    return std::nullopt;
  }
}

void ResponseCache::write_entry(const std::string& key, const std::string& request,
                                const std::string& response) {
  std::lock_guard lock(stripes_[fnv_stripe(key)]);
  const json entry = {{"key", key}, {"request", json::parse(request)}, {"response", json::parse(response)}};
  const auto target = path_for(key);
  std::ostringstream tmp_name;
  tmp_name << key << ".tmp." << std::this_thread::get_id();
  const auto tmp = directory_ / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write cache file " + tmp.string());
    out << entry.dump(1) << '\n';
    if (!out) throw std::runtime_error("cache write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

std::optional<TokenLogProbs> ResponseCache::find(const CompletionRequest& request) const {
  auto text = read_response(cache_key(request));
  if (!text) return std::nullopt;
  return parse_token_logprobs(*text);
}

std::optional<SymbolDistribution> ResponseCache::find(const SymbolRequest& request) const {
  auto text = read_response(cache_key(request));
  if (!text) return std::nullopt;
  return parse_symbol_distribution(*text);
}

void ResponseCache::store(const CompletionRequest& request, const TokenLogProbs& response) {
  write_entry(cache_key(request), canonical_request(request), serialize_response(response));
}

void ResponseCache::store(const SymbolRequest& request, const SymbolDistribution& response) {
  write_entry(cache_key(request), canonical_request(request), serialize_response(response));
}

}  // namespace mcqa
