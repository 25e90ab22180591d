#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "mcqa/dispatch.hpp"
#include "mcqa/errors.hpp"
#include "mcqa/mock.hpp"
#include "mcqa/remote.hpp"
#include "stub_server.hpp"
#include "test_support.hpp"

using namespace mcqa;
using namespace std::chrono_literals;
using mcqa::testing::fixture;
using mcqa::testing::read_file;

namespace {

struct FakeClock {
  Clock::time_point t{};
  std::vector<Clock::duration> sleeps;
  NowFn now() {
    return [this] { return t; };
  }
  SleepFn sleep() {
    return [this](Clock::duration d) {
      sleeps.push_back(d);
      t += d;
    };
  }
  double seconds() const { return std::chrono::duration<double>(t.time_since_epoch()).count(); }
};

// Fails with `kind` for the first `failures` calls, then answers like a flat mock.
class FlakyBackend final : public Backend {
 public:
  FlakyBackend(int failures, BackendError::Kind kind) : failures_(failures), kind_(kind) {}
  TokenLogProbs completion_logprobs(const CompletionRequest& r) override {
    if (calls++ < failures_) throw BackendError(kind_, "flaky " + std::to_string(calls.load()));
    return inner_.completion_logprobs(r);
  }
  SymbolDistribution next_symbol_distribution(const SymbolRequest& r) override {
    if (calls++ < failures_) throw BackendError(kind_, "flaky " + std::to_string(calls.load()));
    return inner_.next_symbol_distribution(r);
  }
  std::atomic<int> calls{0};

 private:
  int failures_;
  BackendError::Kind kind_;
  MockBackend inner_{MockModelSpec{}};
};

class PeakBackend final : public Backend {
 public:
  TokenLogProbs completion_logprobs(const CompletionRequest&) override {
    const int now = ++active_;
    {
      std::lock_guard lock(mutex_);
      peak = std::max(peak, now);
    }
    std::this_thread::sleep_for(5ms);
    --active_;
    return TokenLogProbs{{{" x", -1.0}}};
  }
  SymbolDistribution next_symbol_distribution(const SymbolRequest&) override { return {}; }
  int peak = 0;

 private:
  std::atomic<int> active_{0};
  std::mutex mutex_;
};

}  // namespace

TEST_CASE("token bucket admits a burst of rpm then one every 60/rpm seconds") {
  FakeClock clock;
  RateLimiter limiter(20.0, clock.now(), clock.sleep());
  for (int i = 0; i < 20; ++i) limiter.acquire();
  CHECK(clock.seconds() == 0.0);
  CHECK(std::chrono::duration<double>(limiter.wait_time()).count() == doctest::Approx(3.0));
  for (int i = 0; i < 20; ++i) limiter.acquire();
  CHECK(clock.seconds() == doctest::Approx(60.0).epsilon(0.001));

  clock.t += 10min;
  for (int i = 0; i < 20; ++i) limiter.acquire();
  CHECK(clock.seconds() == doctest::Approx(660.0).epsilon(0.001));
  CHECK_THROWS_AS(RateLimiter(0.0), ConfigError);
}

TEST_CASE("retry delays double from one second") {
  const RetryPolicy policy;
  CHECK(policy.delay_before(1) == 0ms);
  CHECK(policy.delay_before(2) == 1000ms);
  CHECK(policy.delay_before(3) == 2000ms);
  CHECK(policy.delay_before(4) == 4000ms);
  CHECK(policy.delay_before(5) == 8000ms);
}

TEST_CASE("dispatcher retries retryable failures with backoff") {
  FakeClock clock;
  FlakyBackend flaky(2, BackendError::Kind::retryable);
  DispatchOptions options;
  options.now = clock.now();
  options.sleep = clock.sleep();
  Dispatcher dispatcher(flaky, options);
  const auto lp = dispatcher.completion_logprobs({"m", "ctx", " x"});
  CHECK(lp.size() == 1);
  CHECK(flaky.calls == 3);
  CHECK(dispatcher.remote_dispatches() == 3);
  CHECK(clock.sleeps == std::vector<Clock::duration>{1000ms, 2000ms});
}

TEST_CASE("dispatcher gives up after five attempts with the attempt log") {
  FakeClock clock;
  FlakyBackend flaky(100, BackendError::Kind::retryable);
  DispatchOptions options;
  options.now = clock.now();
  options.sleep = clock.sleep();
  Dispatcher dispatcher(flaky, options);
  try {
    dispatcher.next_symbol_distribution({"m", "ctx", {"A"}});
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendError::Kind::terminal);
    REQUIRE(e.attempt_log().size() == 5);
    CHECK(e.attempt_log()[0] == "attempt 1: flaky 1");
    CHECK(e.attempt_log()[4] == "attempt 5: flaky 5");
  }
  CHECK(flaky.calls == 5);
  CHECK(clock.seconds() == doctest::Approx(15.0));
}

TEST_CASE("dispatcher does not retry terminal failures") {
  FakeClock clock;
  FlakyBackend refusing(100, BackendError::Kind::terminal);
  DispatchOptions options;
  options.now = clock.now();
  options.sleep = clock.sleep();
  Dispatcher dispatcher(refusing, options);
  CHECK_THROWS_AS(dispatcher.completion_logprobs({"m", "ctx", " x"}), BackendError);
  CHECK(refusing.calls == 1);
  CHECK(clock.sleeps.empty());
}

TEST_CASE("dispatcher cache answers repeats without remote calls") {
  const auto dir = mcqa::testing::temp_dir("dispatch_cache");
  MockBackend mock(MockModelSpec{});
  CountingBackend counting(mock);
  DispatchOptions options;
  options.cache_dir = dir;
  const CompletionRequest c{"m", "ctx", " x y"};
  const SymbolRequest s{"m", "ctx", {"A", "B"}};
  TokenLogProbs first;
  {
    Dispatcher dispatcher(counting, options);
    first = dispatcher.completion_logprobs(c);
    CHECK(dispatcher.completion_logprobs(c) == first);
    dispatcher.next_symbol_distribution(s);
    CHECK(dispatcher.cache_hits() == 1);
    CHECK(counting.total_calls() == 2);
  }
  counting.reset();
  Dispatcher again(counting, options);
  CHECK(again.completion_logprobs(c) == first);
  again.next_symbol_distribution(s);
  CHECK(counting.total_calls() == 0);
  CHECK(again.remote_dispatches() == 0);
}

TEST_CASE("dispatcher bounds concurrent requests") {
  PeakBackend slow;
  DispatchOptions options;
  options.requests_per_minute = 60000;
  options.max_in_flight = 2;
  Dispatcher dispatcher(slow, options);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i)
    threads.emplace_back([&, i] { dispatcher.completion_logprobs({"m", "ctx", " " + std::to_string(i)}); });
  for (auto& t : threads) t.join();
  CHECK(slow.peak >= 1);
  CHECK(slow.peak <= 2);
  CHECK_THROWS_AS(Dispatcher(slow, DispatchOptions{20.0, 0}), ConfigError);
}

TEST_CASE("remote backend speaks the completions protocol") {
  const auto echo = read_file(fixture("responses/completion_echo.json"));
  const auto symbol = read_file(fixture("responses/symbol_top5.json"));
  std::atomic<int> requests{0};
  std::string auth;
  mcqa::testing::StubServer server([&](const httplib::Request& req, httplib::Response& res) {
    ++requests;
    auth = req.get_header_value("Authorization");
    const auto body = nlohmann::json::parse(req.body);
    res.set_content(body.value("echo", false) ? echo : symbol, "application/json");
  });

  RemoteConfig config;
  config.endpoint = server.endpoint();
  config.api_key = "test-key";
  RemoteBackend remote(config);
  const auto lp = remote.completion_logprobs(
      {"m", "Question: Which of these is a vegetable?\nAnswer:", " French beans"});
  CHECK(lp.sum() == doctest::Approx(-6.0));
  CHECK(auth == "Bearer test-key");

  const auto dist = remote.next_symbol_distribution({"m", "Question: ...\nAnswer:", {"A", "B", "C", "D"}});
  CHECK(dist.entries.at("B") == doctest::Approx(-0.31));
  CHECK(dist.floored == std::vector<std::string>{"D"});
  CHECK(requests == 2);
}

TEST_CASE("remote status codes map to retryable and terminal errors") {
  const auto symbol = read_file(fixture("responses/symbol_top5.json"));
  std::atomic<int> requests{0};
  mcqa::testing::StubServer server([&](const httplib::Request&, httplib::Response& res) {
    const int n = ++requests;
    if (n == 1) {
      res.status = 429;
      res.set_content(R"({"error":"slow down"})", "application/json");
    } else if (n == 2) {
      res.status = 503;
    } else {
      res.set_content(symbol, "application/json");
    }
  });
  RemoteConfig config;
  config.endpoint = server.endpoint();
  RemoteBackend remote(config);

  FakeClock clock;
  DispatchOptions options;
  options.now = clock.now();
  options.sleep = clock.sleep();
  Dispatcher dispatcher(remote, options);
  const auto dist = dispatcher.next_symbol_distribution({"m", "ctx", {"A", "B"}});
  CHECK(dist.entries.at("A") == doctest::Approx(-1.62));
  CHECK(requests == 3);
  CHECK(clock.sleeps == std::vector<Clock::duration>{1000ms, 2000ms});

  mcqa::testing::StubServer refusing([](const httplib::Request&, httplib::Response& res) {
    res.status = 401;
    res.set_content(R"({"error":"bad key"})", "application/json");
  });
  config.endpoint = refusing.endpoint();
  RemoteBackend unauthorized(config);
  try {
    unauthorized.next_symbol_distribution({"m", "ctx", {"A"}});
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendError::Kind::terminal);
    CHECK(e.raw_payload() == R"({"error":"bad key"})");
  }

  config.endpoint = "http://127.0.0.1:1/v1/completions";
  config.timeout = std::chrono::seconds(2);
  RemoteBackend unreachable(config);
  try {
    unreachable.next_symbol_distribution({"m", "ctx", {"A"}});
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.retryable());
  }
  CHECK_THROWS_AS(RemoteBackend(RemoteConfig{"no-scheme"}), ConfigError);
}
