#include "mcqa/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "mcqa/errors.hpp"

namespace mcqa {

namespace {

void default_sleep(Clock::duration d) { std::this_thread::sleep_for(d); }

}  // namespace

RateLimiter::RateLimiter(double requests_per_minute, NowFn now, SleepFn sleep)
    : rate_per_minute_(requests_per_minute),
      capacity_(std::max(1.0, requests_per_minute)),
      tokens_(capacity_),
      now_(now ? std::move(now) : NowFn(Clock::now)),
      sleep_(sleep ? std::move(sleep) : SleepFn(default_sleep)) {
  if (!(requests_per_minute > 0.0)) throw ConfigError("requests per minute must be positive");
  last_ = now_();
}

void RateLimiter::refill(Clock::time_point now) {
  const double elapsed = std::chrono::duration<double>(now - last_).count();
  if (elapsed > 0.0) {
    tokens_ = std::min(capacity_, tokens_ + elapsed * rate_per_minute_ / 60.0);
    last_ = now;
  }
}

Clock::duration RateLimiter::wait_time() {
  std::lock_guard lock(mutex_);
  refill(now_());
  if (tokens_ >= 1.0) return Clock::duration::zero();
  const double seconds = (1.0 - tokens_) * 60.0 / rate_per_minute_;
  return std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(seconds));
}

void RateLimiter::acquire() {
  for (;;) {
    Clock::duration wait;
    {
      std::lock_guard lock(mutex_);
      refill(now_());
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      const double seconds = (1.0 - tokens_) * 60.0 / rate_per_minute_;
      wait = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(seconds)) +
             Clock::duration(1);
    }
    sleep_(wait);
  }
}

std::chrono::milliseconds RetryPolicy::delay_before(std::size_t attempt) const {
  if (attempt <= 1) return std::chrono::milliseconds::zero();
  const double scale = std::pow(factor, static_cast<double>(attempt - 2));
  return std::chrono::milliseconds(
      static_cast<std::chrono::milliseconds::rep>(std::llround(base_delay.count() * scale)));
}

Dispatcher::Dispatcher(Backend& remote, DispatchOptions options)
    : remote_(remote),
      options_(std::move(options)),
      limiter_(options_.requests_per_minute, options_.now, options_.sleep) {
  if (!options_.sleep) options_.sleep = default_sleep;
  if (options_.max_in_flight == 0) throw ConfigError("max in-flight must be at least 1");
  if (options_.retry.max_attempts == 0) throw ConfigError("retry attempts must be at least 1");
  if (options_.cache_dir) cache_ = std::make_unique<ResponseCache>(*options_.cache_dir);
}

template <typename Fn>
auto Dispatcher::with_retries(const std::string& what, Fn&& call) -> decltype(call()) {
  std::vector<std::string> log;
  for (std::size_t attempt = 1; attempt <= options_.retry.max_attempts; ++attempt) {
    if (attempt > 1) options_.sleep(options_.retry.delay_before(attempt));
    limiter_.acquire();
    {
      std::unique_lock lock(flight_mutex_);
      flight_cv_.wait(lock, [&] { return in_flight_ < options_.max_in_flight; });
      ++in_flight_;
    }
    struct Release {
      Dispatcher* self;
      ~Release() {
        {
          std::lock_guard lock(self->flight_mutex_);
          --self->in_flight_;
        }
        self->flight_cv_.notify_one();
      }
    } release{this};

    ++dispatches_;
    try {
      return call();
    } catch (const BackendError& e) {
      if (!e.retryable()) throw;
      log.push_back("attempt " + std::to_string(attempt) + ": " + e.what());
    }
  }
  throw BackendError(BackendError::Kind::terminal,
                     what + ": gave up after " + std::to_string(log.size()) + " attempts", {},
                     std::move(log));
}

TokenLogProbs Dispatcher::completion_logprobs(const CompletionRequest& request) {
  check_request(request);
  if (cache_) {
    if (auto hit = cache_->find(request)) {
      ++hits_;
      return *hit;
    }
  }
  auto response = with_retries("completion_logprobs",
                               [&] { return remote_.completion_logprobs(request); });
  if (cache_) cache_->store(request, response);
  return response;
}

SymbolDistribution Dispatcher::next_symbol_distribution(const SymbolRequest& request) {
  check_request(request);
  if (cache_) {
    if (auto hit = cache_->find(request)) {
      ++hits_;
      return *hit;
    }
  }
  auto response = with_retries("next_symbol_distribution",
                               [&] { return remote_.next_symbol_distribution(request); });
  if (cache_) cache_->store(request, response);
  return response;
}

}  // namespace mcqa
