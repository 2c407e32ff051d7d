#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "halo/cache_store.hpp"
#include "halo/rate_limiter.hpp"

namespace halo {

// Self-contained chat request. There is deliberately no history field:
// every call carries its full context, so runs are stateless per item.
struct ChatRequest {
    std::string system_text;
    std::string user_text;
    double temperature = 0.0;
    int max_output_tokens = 1024;
    std::string model_id;
};

struct ChatResponse {
    std::string text;
    std::string provider_id;
    bool cached = false;
    long latency_ms = 0;
};

struct ProviderConfig {
    std::string provider_id;
    std::string endpoint;                    // full URL of the chat completion route
    std::string auth_token_env_var;          // token read from env at call time
    std::string auth_header = "Authorization";
    std::string auth_scheme = "Bearer ";
    double requests_per_second_limit = 3.0;
    int max_retries = 4;
    int retry_initial_delay_ms = 500;        // doubles per attempt, jitter +-20%
};

// Content digest over (model_id, system_text, user_text, temperature,
// max_output_tokens) with a fixed canonical serialization, so equal
// requests map to equal cache entries across runs and platforms.
std::string cache_key(const ChatRequest& req);

// Raw dispatch layer under the gateway. Implementations: live HTTP
// provider, fixture-backed mock, counting fakes in tests.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string send(const ChatRequest& req, const ProviderConfig& cfg) = 0;
};

// Mock provider: a table from request digest or user_text regex to a
// canned response, loaded from a JSON fixture file:
//   [{"match": {"digest": "..."} | {"user_text_regex": "..."}, "response": "..."}]
class MockBackend : public ChatBackend {
public:
    MockBackend() = default;
    static MockBackend from_file(const std::string& path);
    static MockBackend from_json_text(const std::string& json_text);

    void add_digest_rule(const std::string& digest, const std::string& response);
    void add_regex_rule(const std::string& pattern, const std::string& response);

    std::string send(const ChatRequest& req, const ProviderConfig& cfg) override;

private:
    struct Rule {
        bool is_digest;
        std::string digest;
        std::string pattern;
        std::string response;
    };
    std::vector<Rule> rules_;
};

// Live provider speaking the common chat-completions JSON shape.
class HttpBackend : public ChatBackend {
public:
    std::string send(const ChatRequest& req, const ProviderConfig& cfg) override;
};

struct CallLogEntry {
    std::string digest;
    bool cache_hit;
    std::string user_text;
};

// Records every complete() call; used by the statelessness audit.
class CallLog {
public:
    void record(CallLogEntry e);
    std::vector<CallLogEntry> entries() const;
    size_t size() const;

private:
    mutable std::mutex mu_;
    std::vector<CallLogEntry> entries_;
};

// Uniform stateless access to a chat provider with retries, shared rate
// limiting, and a persistent response cache keyed by request content.
class Gateway {
public:
    Gateway(ProviderConfig cfg, std::shared_ptr<ChatBackend> backend,
            std::shared_ptr<CacheStore> cache = nullptr,
            std::shared_ptr<RateLimiter> limiter = nullptr,
            std::shared_ptr<CallLog> log = nullptr);

    ChatResponse complete(const ChatRequest& req);

    const ProviderConfig& config() const { return cfg_; }

private:
    ProviderConfig cfg_;
    std::shared_ptr<ChatBackend> backend_;
    std::shared_ptr<CacheStore> cache_;
    std::shared_ptr<RateLimiter> limiter_;
    std::shared_ptr<CallLog> log_;
};

}  // namespace halo
