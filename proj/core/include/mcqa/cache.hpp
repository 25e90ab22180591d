#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "mcqa/backend.hpp"

namespace mcqa {

// Canonical JSON text of a request (sorted keys, no whitespace). The cache
// key is the SHA-256 of this text.
std::string canonical_request(const CompletionRequest& request);
std::string canonical_request(const SymbolRequest& request);

std::string sha256_hex(std::string_view bytes);

std::string cache_key(const CompletionRequest& request);
std::string cache_key(const SymbolRequest& request);

std::string serialize_response(const TokenLogProbs& response);
std::string serialize_response(const SymbolDistribution& response);
TokenLogProbs parse_token_logprobs(std::string_view text);
SymbolDistribution parse_symbol_distribution(std::string_view text);

/// Content-addressed response store: one JSON file per response, named by the
/// hex digest of the canonical request, holding the request and response.
/// Readers may run concurrently; writers publish with an atomic rename.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path directory);

  std::optional<TokenLogProbs> find(const CompletionRequest& request) const;
  std::optional<SymbolDistribution> find(const SymbolRequest& request) const;

  void store(const CompletionRequest& request, const TokenLogProbs& response);
  void store(const SymbolRequest& request, const SymbolDistribution& response);

  const std::filesystem::path& directory() const noexcept { return directory_; }
  std::filesystem::path path_for(std::string_view key) const;

  static constexpr std::size_t kStripes = 64;

 private:
  std::optional<std::string> read_response(const std::string& key) const;
  void write_entry(const std::string& key, const std::string& request,
                   const std::string& response);

  std::filesystem::path directory_;
  mutable std::mutex stripes_[kStripes];
};

}  // namespace mcqa
