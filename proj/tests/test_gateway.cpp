#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <random>

#include "halo/errors.hpp"
#include "halo/gateway.hpp"

using namespace halo;

namespace {

ChatRequest fixture_request() {
    ChatRequest req;
    req.model_id = "test-model";
    req.system_text = "sys";
    req.user_text = "hello world";
    req.temperature = 0.25;
    req.max_output_tokens = 256;
    return req;
}

std::filesystem::path temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("halo_test_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(dir);
    return dir;
}

// Counts dispatches; optionally fails the first N attempts.
class CountingBackend : public ChatBackend {
public:
    explicit CountingBackend(int fail_first = 0, bool fail_with_auth = false)
        : fail_first_(fail_first), fail_with_auth_(fail_with_auth) {}

    std::string send(const ChatRequest& req, const ProviderConfig&) override {
        ++calls;
        if (calls <= fail_first_) {
            if (fail_with_auth_) throw AuthError("bad token");
            throw NetworkError("transient failure");
        }
        return "reply to: " + req.user_text;
    }

    int calls = 0;

private:
    int fail_first_;
    bool fail_with_auth_;
};

}  // namespace

TEST_CASE("cache_key is deterministic and content-sensitive") {
    ChatRequest a = fixture_request();
    ChatRequest b = fixture_request();
    CHECK(cache_key(a) == cache_key(b));

    b.temperature = 0.26;
    CHECK(cache_key(a) != cache_key(b));

    b = fixture_request();
    b.user_text = "hello worlds";
    CHECK(cache_key(a) != cache_key(b));

    b = fixture_request();
    b.model_id = "other-model";
    CHECK(cache_key(a) != cache_key(b));
}

TEST_CASE("cache_key matches the frozen golden digest") {
    // Golden value computed with an independent sha256 over the documented
    // canonical serialization of the fixture request.
    CHECK(cache_key(fixture_request()) ==
          "302947c5dc071cdd787187edd645a57fb87176913aec0f2840da7ad9f86a9453");
}

TEST_CASE("mock provider lookup and cache idempotence") {
    ChatRequest req = fixture_request();
    auto mock = std::make_shared<MockBackend>();
    mock->add_digest_rule(cache_key(req), "B");

    auto cache_dir = temp_dir("gwcache");
    auto cache = std::make_shared<CacheStore>(cache_dir);
    Gateway gw(ProviderConfig{.provider_id = "mock"}, mock, cache);

    ChatResponse first = gw.complete(req);
    CHECK(first.text == "B");
    CHECK_FALSE(first.cached);

    ChatResponse second = gw.complete(req);
    CHECK(second.text == "B");
    CHECK(second.cached);

    std::filesystem::remove_all(cache_dir);
}

TEST_CASE("empty user_text is rejected before dispatch") {
    auto backend = std::make_shared<CountingBackend>();
    Gateway gw(ProviderConfig{}, backend);
    ChatRequest req = fixture_request();
    req.user_text = "   ";
    CHECK_THROWS_AS(gw.complete(req), PreconditionViolation);
    CHECK(backend->calls == 0);
}

TEST_CASE("statelessness: responses are independent of call order") {
    auto mock = std::make_shared<MockBackend>();
    std::vector<ChatRequest> reqs;
    for (int i = 0; i < 5; ++i) {
        ChatRequest r = fixture_request();
        r.user_text = "question " + std::to_string(i);
        mock->add_digest_rule(cache_key(r), "answer " + std::to_string(i));
        reqs.push_back(r);
    }
    Gateway gw(ProviderConfig{}, mock);

    std::vector<std::string> forward, backward;
    for (const auto& r : reqs) forward.push_back(gw.complete(r).text);
    for (auto it = reqs.rbegin(); it != reqs.rend(); ++it)
        backward.insert(backward.begin(), gw.complete(*it).text);
    CHECK(forward == backward);
}

TEST_CASE("retries recover from transient failures") {
    auto backend = std::make_shared<CountingBackend>(2);
    ProviderConfig cfg;
    cfg.max_retries = 4;
    cfg.retry_initial_delay_ms = 1;
    Gateway gw(cfg, backend);

    ChatResponse resp = gw.complete(fixture_request());
    CHECK(resp.text == "reply to: hello world");
    CHECK(backend->calls == 3);
}

TEST_CASE("retry exhaustion surfaces ProviderError with the digest") {
    auto backend = std::make_shared<CountingBackend>(100);
    ProviderConfig cfg;
    cfg.max_retries = 2;
    cfg.retry_initial_delay_ms = 1;
    Gateway gw(cfg, backend);

    ChatRequest req = fixture_request();
    try {
        gw.complete(req);
        FAIL("expected ProviderError");
    } catch (const ProviderError& e) {
        CHECK(e.digest == cache_key(req));
    }
    CHECK(backend->calls == 3);  // initial + 2 retries
}

TEST_CASE("auth failures are not retried") {
    auto backend = std::make_shared<CountingBackend>(100, /*fail_with_auth=*/true);
    ProviderConfig cfg;
    cfg.max_retries = 4;
    cfg.retry_initial_delay_ms = 1;
    Gateway gw(cfg, backend);

    CHECK_THROWS_AS(gw.complete(fixture_request()), AuthError);
    CHECK(backend->calls == 1);
}

TEST_CASE("call log records every completion call including cache hits") {
    ChatRequest req = fixture_request();
    auto mock = std::make_shared<MockBackend>();
    mock->add_digest_rule(cache_key(req), "B");
    auto cache_dir = temp_dir("calllog");
    auto log = std::make_shared<CallLog>();
    Gateway gw(ProviderConfig{}, mock, std::make_shared<CacheStore>(cache_dir), nullptr, log);

    gw.complete(req);
    gw.complete(req);
    auto entries = log->entries();
    REQUIRE(entries.size() == 2);
    CHECK_FALSE(entries[0].cache_hit);
    CHECK(entries[1].cache_hit);
    CHECK(entries[0].digest == entries[1].digest);

    std::filesystem::remove_all(cache_dir);
}

TEST_CASE("rate limiter admits at most ceil(limit) per sliding second") {
    auto now = std::chrono::steady_clock::now();
    auto fake_now = now;
    RateLimiter limiter(3.0, [&fake_now] { return fake_now; });

    CHECK(limiter.try_acquire());
    CHECK(limiter.try_acquire());
    CHECK(limiter.try_acquire());
    CHECK_FALSE(limiter.try_acquire());

    fake_now += std::chrono::milliseconds(999);
    CHECK_FALSE(limiter.try_acquire());

    fake_now += std::chrono::milliseconds(2);
    CHECK(limiter.try_acquire());
}

TEST_CASE("gateway dispatches obey the shared rate limiter") {
    auto backend = std::make_shared<CountingBackend>();
    auto limiter = std::make_shared<RateLimiter>(3.0);
    Gateway gw(ProviderConfig{}, backend, nullptr, limiter);

    std::vector<std::chrono::steady_clock::time_point> stamps;
    for (int i = 0; i < 5; ++i) {
        ChatRequest r = fixture_request();
        r.user_text = "rl " + std::to_string(i);
        gw.complete(r);
        stamps.push_back(std::chrono::steady_clock::now());
    }
    // Any window of 4 consecutive dispatches must span more than a second.
    for (size_t i = 0; i + 3 < stamps.size(); ++i)
        CHECK(stamps[i + 3] - stamps[i] >= std::chrono::milliseconds(950));
}
