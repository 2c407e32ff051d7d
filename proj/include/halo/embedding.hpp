#pragma once

#include <memory>
#include <string>
#include <vector>

#include "halo/cache_store.hpp"

namespace halo {

struct Embedding {
    std::vector<double> vector;
    std::string model_id;
    bool normalized = false;

    size_t dim() const { return vector.size(); }
};

enum class EmbedKind { query, document };

struct EmbedRequest {
    std::string instruction;  // task prefix for instruction-finetuned embedders
    std::string content;
    EmbedKind kind = EmbedKind::document;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual Embedding embed_raw(const std::string& text) = 0;
    virtual std::string model_id() const = 0;
    virtual size_t declared_dim() const = 0;
};

// Deterministic test embedder: tokens hashed into a fixed-dim
// bag-of-hashed-tokens vector, then L2-normalized. Integer hashing only,
// so vectors are reproducible across runs and platforms.
class HashEmbedder : public EmbeddingProvider {
public:
    explicit HashEmbedder(size_t dim = 64, uint64_t seed = 0x9e3779b97f4a7c15ULL);

    Embedding embed_raw(const std::string& text) override;
    std::string model_id() const override { return "hash-embedder"; }
    size_t declared_dim() const override { return dim_; }

private:
    size_t dim_;
    uint64_t seed_;
};

// Live embedding provider: JSON {model, input:[text]} -> vector list.
class HttpEmbedder : public EmbeddingProvider {
public:
    HttpEmbedder(std::string endpoint, std::string model, size_t dim,
                 std::string auth_token_env_var = {});

    Embedding embed_raw(const std::string& text) override;
    std::string model_id() const override { return model_; }
    size_t declared_dim() const override { return dim_; }

private:
    std::string endpoint_;
    std::string model_;
    size_t dim_;
    std::string auth_env_;
};

// Provider + persistent vector cache + instruction prefixes. All stored
// embeddings are normalized at write time, so Rel and Sim are single dot
// products downstream.
class EmbeddingStore {
public:
    explicit EmbeddingStore(std::shared_ptr<EmbeddingProvider> provider,
                            std::shared_ptr<CacheStore> cache = nullptr);

    Embedding embed(const EmbedRequest& req);

    // Convenience wrappers with the default task instructions.
    Embedding embed_query(const std::string& text);
    Embedding embed_document(const std::string& text);

    static const char* default_query_instruction();
    static const char* default_document_instruction();

private:
    std::shared_ptr<EmbeddingProvider> provider_;
    std::shared_ptr<CacheStore> cache_;
};

double cosine(const Embedding& a, const Embedding& b);

// Rel(D_i, Q_k): relevance of a chunk to a query, realized as cosine.
double relevance(const Embedding& chunk_emb, const Embedding& query_emb);

void l2_normalize(Embedding& e);

}  // namespace halo
