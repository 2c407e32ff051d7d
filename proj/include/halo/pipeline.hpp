#pragma once

#include <memory>
#include <string>
#include <vector>

#include "halo/embedding.hpp"
#include "halo/expansion.hpp"
#include "halo/gateway.hpp"
#include "halo/mmr.hpp"
#include "halo/prompt.hpp"
#include "halo/retrieval.hpp"

namespace halo {

struct PipelineConfig {
    ExpansionConfig expansion;
    MmrConfig mmr;
    int per_query_max = 5;
    size_t max_chunk_chars = 1200;
    size_t overlap_chars = 0;
    double answer_temperature = 0.0;
    int answer_max_tokens = 1024;
    std::string answer_model_id;
};

// Shared handles for one question's end-to-end run. The same context is
// reused across items; per-item work never mutates it beyond caches.
struct PipelineContext {
    std::shared_ptr<Gateway> gateway;
    std::shared_ptr<EmbeddingStore> embeddings;
    SourceConfig sources;
    PipelineConfig config;
};

struct AskResult {
    ParsedAnswer parsed;
    PromptBundle bundle;
    ExpandedQuerySet queries;
    SelectionState selection;
    std::vector<Chunk> selected_chunks;
    std::vector<std::string> warnings;
    long expand_ms = 0;
    long retrieve_ms = 0;
    long select_ms = 0;
    long answer_ms = 0;
};

// Full HALO pipeline for one item: expand -> retrieve -> chunk ->
// score -> select -> assemble -> complete -> parse. Baseline mode skips
// everything before assemble.
AskResult answer_item(const McqItem& item, PromptMode mode, PipelineContext& ctx);

std::vector<std::string> option_texts(const McqItem& item);

}  // namespace halo
