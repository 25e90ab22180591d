#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mcqa/backend.hpp"
#include "mcqa/cache.hpp"

namespace mcqa {

using Clock = std::chrono::steady_clock;
using SleepFn = std::function<void(Clock::duration)>;
using NowFn = std::function<Clock::time_point()>;

// Token bucket holding at most `requests_per_minute` tokens, refilled
// continuously at requests_per_minute / 60 per second and starting full.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_minute, NowFn now = Clock::now,
                       SleepFn sleep = nullptr);

  // Blocks until a token is available, then takes it.
  void acquire();

  // Time until a token would be available, without taking one.
  Clock::duration wait_time();

  double requests_per_minute() const noexcept { return rate_per_minute_; }

 private:
  void refill(Clock::time_point now);

  double rate_per_minute_;
  double capacity_;
  double tokens_;
  Clock::time_point last_;
  NowFn now_;
  SleepFn sleep_;
  std::mutex mutex_;
};

struct RetryPolicy {
  std::size_t max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  double factor = 2.0;

  // Delay before attempt `attempt` (1-based; attempt 1 is not delayed).
  std::chrono::milliseconds delay_before(std::size_t attempt) const;
};

struct DispatchOptions {
  double requests_per_minute = 20.0;
  std::size_t max_in_flight = 4;
  RetryPolicy retry;
  std::optional<std::filesystem::path> cache_dir;
  SleepFn sleep;  // defaults to std::this_thread::sleep_for
  NowFn now;      // defaults to steady_clock::now
};

/// Front door to an expensive backend: cache lookup, then a rate-limited and
/// in-flight-bounded dispatch with exponential-backoff retries, then store.
class Dispatcher final : public Backend {
 public:
  Dispatcher(Backend& remote, DispatchOptions options);

  TokenLogProbs completion_logprobs(const CompletionRequest& request) override;
  SymbolDistribution next_symbol_distribution(const SymbolRequest& request) override;
  std::size_t count_tokens(std::string_view text) const override {
    return remote_.count_tokens(text);
  }

  // Attempts sent to the wrapped backend (retries included).
  std::size_t remote_dispatches() const noexcept { return dispatches_.load(); }
  std::size_t cache_hits() const noexcept { return hits_.load(); }

 private:
  template <typename Fn>
  auto with_retries(const std::string& what, Fn&& call) -> decltype(call());

  Backend& remote_;
  DispatchOptions options_;
  std::unique_ptr<ResponseCache> cache_;
  RateLimiter limiter_;
  std::mutex flight_mutex_;
  std::condition_variable flight_cv_;
  std::size_t in_flight_ = 0;
  std::atomic<std::size_t> dispatches_{0};
  std::atomic<std::size_t> hits_{0};
};

}  // namespace mcqa
