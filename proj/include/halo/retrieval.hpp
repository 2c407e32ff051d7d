#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "halo/expansion.hpp"
#include "halo/rate_limiter.hpp"

namespace halo {

enum class DocSource { pubmed, local };

struct Document {
    std::string doc_id;  // PMID-derived or local hash
    std::string title;
    std::string body;
    DocSource source = DocSource::local;
    std::set<std::string> retrieved_by;  // query ids
    std::string fetched_at;              // UTC timestamp, ISO 8601
};

struct CandidatePool {
    std::vector<Document> documents;  // sorted by doc_id
    ExpandedQuerySet query_set;
    std::vector<std::string> warnings;
};

struct Chunk {
    std::string parent_doc_id;
    int ordinal = 0;
    std::string text;
    size_t span_begin = 0;
    size_t span_end = 0;  // half-open offsets into the parent body
};

// HTTP GET as a function so tests replay recorded responses.
using HttpGetter = std::function<std::string(const std::string& url)>;

HttpGetter live_http_getter();

// Replay getter backed by a JSON fixture:
//   {"esearch": {"<term>": "<body>"}, "efetch": {"<comma pmids>": "<body>"}}
HttpGetter replay_getter_from_file(const std::string& path);

// NCBI E-utilities client for PubMed search + abstract fetch.
class PubMedClient {
public:
    struct Options {
        std::string base_url = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils";
        std::string api_key_env_var = "NCBI_API_KEY";
    };

    PubMedClient(HttpGetter getter, std::shared_ptr<RateLimiter> limiter, Options opts);
    PubMedClient(HttpGetter getter, std::shared_ptr<RateLimiter> limiter)
        : PubMedClient(std::move(getter), std::move(limiter), Options{}) {}

    std::vector<std::string> search(const Query& query, int max_results);

    struct FetchResult {
        std::vector<Document> documents;
        std::vector<std::string> warnings;  // PMIDs skipped for missing abstracts
    };
    FetchResult fetch(const std::vector<std::string>& pmids);

private:
    HttpGetter getter_;
    std::shared_ptr<RateLimiter> limiter_;
    Options opts_;
};

struct IngestResult {
    std::vector<Document> documents;
    std::vector<std::string> warnings;  // line-numbered parse failures
};

// Line-delimited JSON {id, title, body} -> local Documents.
IngestResult ingest_local(const std::string& path);

// Split a document body into selection-ready passages, preferring
// sentence boundaries below the size limit.
std::vector<Chunk> chunk_document(const Document& doc, size_t max_chunk_chars,
                                  size_t overlap_chars = 0);

// Simple term-overlap retriever over an ingested corpus; stands in for
// PubMed when running offline.
class LocalCorpus {
public:
    explicit LocalCorpus(std::vector<Document> docs);
    static LocalCorpus from_file(const std::string& path);

    std::vector<Document> search(const Query& query, int max_results) const;

private:
    std::vector<Document> docs_;
};

struct SourceConfig {
    PubMedClient* pubmed = nullptr;
    const LocalCorpus* local = nullptr;
};

// One retrieval per query in [original] + variants, merged by doc_id
// with retrieved_by unioned; deterministic pool order (sorted by doc_id).
CandidatePool build_pool(const ExpandedQuerySet& qs, int per_query_max,
                         const SourceConfig& sources);

}  // namespace halo
