#include "halo/gateway.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "halo/errors.hpp"
#include "halo/text_util.hpp"

// httplib pulled in only here; OpenSSL enabled for https endpoints.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace halo {

using nlohmann::json;

std::string cache_key(const ChatRequest& req) {
    // Canonical v1 serialization: fixed field order, temperature at six
    // decimals, fields joined with an unambiguous separator.
    char temp[32];
    std::snprintf(temp, sizeof(temp), "%.6f", req.temperature);
    std::string canon = "chatreq/1|model=" + req.model_id + "|system=" + req.system_text +
                        "|user=" + req.user_text + "|temp=" + temp +
                        "|max_tokens=" + std::to_string(req.max_output_tokens);
    return sha256_hex(canon);
}

// --- MockBackend ---

MockBackend MockBackend::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mock fixture " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

MockBackend MockBackend::from_json_text(const std::string& json_text) {
    MockBackend mock;
    json doc = json::parse(json_text);
    for (const auto& entry : doc) {
        const auto& match = entry.at("match");
        std::string response = entry.at("response").get<std::string>();
        if (match.contains("digest")) {
            mock.add_digest_rule(match["digest"].get<std::string>(), response);
        } else if (match.contains("user_text_regex")) {
            mock.add_regex_rule(match["user_text_regex"].get<std::string>(), response);
        } else {
            throw MalformedResponse("mock rule needs digest or user_text_regex");
        }
    }
    return mock;
}

void MockBackend::add_digest_rule(const std::string& digest, const std::string& response) {
    rules_.push_back(Rule{true, digest, "", response});
}

void MockBackend::add_regex_rule(const std::string& pattern, const std::string& response) {
    rules_.push_back(Rule{false, "", pattern, response});
}

std::string MockBackend::send(const ChatRequest& req, const ProviderConfig&) {
    std::string digest = cache_key(req);
    for (const auto& rule : rules_) {
        if (rule.is_digest) {
            if (rule.digest == digest) return rule.response;
        } else {
            std::regex re(rule.pattern);
            if (std::regex_search(req.user_text, re)) return rule.response;
        }
    }
    throw ProviderError("mock provider has no rule for request", digest);
}

// --- HttpBackend ---

std::string HttpBackend::send(const ChatRequest& req, const ProviderConfig& cfg) {
    std::string digest = cache_key(req);

    std::string token;
    if (!cfg.auth_token_env_var.empty()) {
        const char* env = std::getenv(cfg.auth_token_env_var.c_str());
        if (!env || !*env)
            throw AuthError("auth token env var " + cfg.auth_token_env_var + " is not set", digest);
        token = env;
    }

    // Split endpoint into host part and path.
    std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(cfg.endpoint, m, url_re))
        throw ProviderError("bad endpoint URL: " + cfg.endpoint, digest);
    std::string base = m[1].str();
    std::string path = m[2].matched ? m[2].str() : "/";

    json body = {
        {"model", req.model_id},
        {"messages",
         json::array({{{"role", "system"}, {"content", req.system_text}},
                      {{"role", "user"}, {"content", req.user_text}}})},
        {"temperature", req.temperature},
        {"max_tokens", req.max_output_tokens},
    };

    httplib::Client client(base);
    client.set_read_timeout(60, 0);
    httplib::Headers headers;
    if (!token.empty()) headers.emplace(cfg.auth_header, cfg.auth_scheme + token);

    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) throw NetworkError("connection to " + base + " failed");
    if (res->status == 401 || res->status == 403)
        throw AuthError("provider rejected credentials (" + std::to_string(res->status) + ")", digest);
    if (res->status == 429)
        throw RateLimitExhausted("provider returned 429", digest);
    if (res->status < 200 || res->status >= 300)
        throw ProviderError("provider returned status " + std::to_string(res->status), digest);

    try {
        json doc = json::parse(res->body);
        return doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw MalformedResponse(std::string("cannot parse provider response: ") + e.what());
    }
}

// --- CallLog ---

void CallLog::record(CallLogEntry e) {
    std::lock_guard lock(mu_);
    entries_.push_back(std::move(e));
}

std::vector<CallLogEntry> CallLog::entries() const {
    std::lock_guard lock(mu_);
    return entries_;
}

size_t CallLog::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

// --- Gateway ---

Gateway::Gateway(ProviderConfig cfg, std::shared_ptr<ChatBackend> backend,
                 std::shared_ptr<CacheStore> cache, std::shared_ptr<RateLimiter> limiter,
                 std::shared_ptr<CallLog> log)
    : cfg_(std::move(cfg)),
      backend_(std::move(backend)),
      cache_(std::move(cache)),
      limiter_(std::move(limiter)),
      log_(std::move(log)) {}

ChatResponse Gateway::complete(const ChatRequest& req) {
    if (trim(req.user_text).empty())
        throw PreconditionViolation("ChatRequest.user_text must be non-empty");

    std::string digest = cache_key(req);
    auto started = std::chrono::steady_clock::now();

    if (cache_) {
        if (auto hit = cache_->get(digest)) {
            if (log_) log_->record({digest, true, req.user_text});
            auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - started)
                               .count();
            return ChatResponse{*hit, cfg_.provider_id, true, static_cast<long>(elapsed)};
        }
    }
    if (log_) log_->record({digest, false, req.user_text});

    std::mt19937 rng(std::random_device{}());
    std::uniform_real_distribution<double> jitter(0.8, 1.2);

    std::string text;
    int attempt = 0;
    while (true) {
        try {
            if (limiter_) limiter_->acquire();
            text = backend_->send(req, cfg_);
            break;
        } catch (const AuthError&) {
            throw;  // credentials will not improve with retries
        } catch (const Error& e) {
            if (attempt >= cfg_.max_retries) {
                if (dynamic_cast<const RateLimitExhausted*>(&e))
                    throw RateLimitExhausted(std::string(e.what()) + " (retries exhausted)", digest);
                throw ProviderError(std::string(e.what()) + " (retries exhausted)", digest);
            }
            double delay = cfg_.retry_initial_delay_ms * std::pow(2.0, attempt) * jitter(rng);
            std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(delay)));
            ++attempt;
        }
    }

    if (cache_) cache_->put(digest, text);
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - started)
                       .count();
    return ChatResponse{text, cfg_.provider_id, false, static_cast<long>(elapsed)};
}

}  // namespace halo
