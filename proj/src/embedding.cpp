#include "halo/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <regex>

#include <json.hpp>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "halo/errors.hpp"
#include "halo/text_util.hpp"

namespace halo {

using nlohmann::json;

namespace {

// splitmix64: stable integer mixing, no platform-dependent floats.
uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

uint64_t fnv1a(const std::string& s, uint64_t seed) {
    uint64_t h = 14695981039346656037ULL ^ seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

void l2_normalize(Embedding& e) {
    double norm2 = 0.0;
    for (double v : e.vector) norm2 += v * v;
    double norm = std::sqrt(norm2);
    if (norm > 0.0)
        for (double& v : e.vector) v /= norm;
    e.normalized = true;
}

HashEmbedder::HashEmbedder(size_t dim, uint64_t seed) : dim_(dim), seed_(seed) {}

Embedding HashEmbedder::embed_raw(const std::string& text) {
    Embedding e;
    e.vector.assign(dim_, 0.0);
    e.model_id = model_id();

    std::string token;
    auto flush = [&]() {
        if (token.empty()) return;
        uint64_t h = mix64(fnv1a(token, seed_));
        size_t bucket = h % dim_;
        double sign = ((h >> 32) & 1) ? 1.0 : -1.0;
        e.vector[bucket] += sign;
        token.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        else
            flush();
    }
    flush();

    // All-zero (no tokens) falls back to a content-hash direction so the
    // result is still unit norm.
    bool all_zero = std::all_of(e.vector.begin(), e.vector.end(), [](double v) { return v == 0.0; });
    if (all_zero) {
        uint64_t h = mix64(fnv1a(text, seed_ ^ 0xabcdef));
        e.vector[h % dim_] = 1.0;
    }
    l2_normalize(e);
    return e;
}

HttpEmbedder::HttpEmbedder(std::string endpoint, std::string model, size_t dim,
                           std::string auth_token_env_var)
    : endpoint_(std::move(endpoint)),
      model_(std::move(model)),
      dim_(dim),
      auth_env_(std::move(auth_token_env_var)) {}

Embedding HttpEmbedder::embed_raw(const std::string& text) {
    std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(endpoint_, m, url_re))
        throw ProviderError("bad embedding endpoint: " + endpoint_);

    httplib::Client client(m[1].str());
    client.set_read_timeout(60, 0);
    httplib::Headers headers;
    if (!auth_env_.empty()) {
        const char* token = std::getenv(auth_env_.c_str());
        if (!token || !*token) throw AuthError("embedding auth env var " + auth_env_ + " not set");
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    json body = {{"model", model_}, {"input", json::array({text})}};
    auto res = client.Post(m[2].matched ? m[2].str() : "/", headers, body.dump(), "application/json");
    if (!res) throw NetworkError("embedding request failed: " + endpoint_);
    if (res->status < 200 || res->status >= 300)
        throw ProviderError("embedding provider returned " + std::to_string(res->status));

    Embedding e;
    e.model_id = model_;
    try {
        json doc = json::parse(res->body);
        const json* vec = nullptr;
        if (doc.contains("data"))
            vec = &doc["data"].at(0).at("embedding");
        else if (doc.contains("embeddings"))
            vec = &doc["embeddings"].at(0);
        else
            vec = &doc.at(0);
        for (const auto& v : *vec) e.vector.push_back(v.get<double>());
    } catch (const json::exception& ex) {
        throw MalformedResponse(std::string("cannot parse embedding response: ") + ex.what());
    }
    if (e.vector.size() != dim_)
        throw DimensionMismatch("provider returned dim " + std::to_string(e.vector.size()) +
                                ", declared " + std::to_string(dim_));
    l2_normalize(e);
    return e;
}

const char* EmbeddingStore::default_query_instruction() {
    return "Represent the medical question for retrieving supporting documents:";
}

const char* EmbeddingStore::default_document_instruction() {
    return "Represent the medical document for retrieval:";
}

EmbeddingStore::EmbeddingStore(std::shared_ptr<EmbeddingProvider> provider,
                               std::shared_ptr<CacheStore> cache)
    : provider_(std::move(provider)), cache_(std::move(cache)) {}

Embedding EmbeddingStore::embed(const EmbedRequest& req) {
    if (trim(req.content).empty())
        throw PreconditionViolation("EmbedRequest.content must be non-empty");

    std::string full_text = req.instruction.empty() ? req.content : req.instruction + " " + req.content;
    std::string key =
        sha256_hex("embed/1|model=" + provider_->model_id() + "|text=" + full_text);

    if (cache_) {
        if (auto hit = cache_->get(key)) {
            json doc = json::parse(*hit);
            Embedding e;
            e.model_id = provider_->model_id();
            for (const auto& v : doc) e.vector.push_back(v.get<double>());
            e.normalized = true;
            return e;
        }
    }

    Embedding e = provider_->embed_raw(full_text);
    if (e.dim() != provider_->declared_dim())
        throw DimensionMismatch("provider returned dim " + std::to_string(e.dim()) +
                                ", declared " + std::to_string(provider_->declared_dim()));
    if (!e.normalized) l2_normalize(e);

    for (double v : e.vector)
        if (!std::isfinite(v)) throw ProviderError("non-finite embedding entry");

    if (cache_) {
        json doc = json::array();
        for (double v : e.vector) doc.push_back(v);
        cache_->put(key, doc.dump());
    }
    return e;
}

Embedding EmbeddingStore::embed_query(const std::string& text) {
    return embed({default_query_instruction(), text, EmbedKind::query});
}

Embedding EmbeddingStore::embed_document(const std::string& text) {
    return embed({default_document_instruction(), text, EmbedKind::document});
}

double cosine(const Embedding& a, const Embedding& b) {
    if (a.dim() != b.dim())
        throw DimensionMismatch("cosine dims " + std::to_string(a.dim()) + " vs " +
                                std::to_string(b.dim()));
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.dim(); ++i) {
        dot += a.vector[i] * b.vector[i];
        na += a.vector[i] * a.vector[i];
        nb += b.vector[i] * b.vector[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    double value = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(value, -1.0, 1.0);
}

double relevance(const Embedding& chunk_emb, const Embedding& query_emb) {
    return cosine(chunk_emb, query_emb);
}

}  // namespace halo
