#include "halo/pipeline.hpp"

#include <chrono>
#include <map>

#include "halo/errors.hpp"

namespace halo {

namespace {

long ms_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start)
        .count();
}

}  // namespace

std::vector<std::string> option_texts(const McqItem& item) {
    std::vector<std::string> out;
    out.reserve(item.options.size());
    for (const auto& opt : item.options) out.push_back(opt.text);
    return out;
}

AskResult answer_item(const McqItem& item, PromptMode mode, PipelineContext& ctx) {
    AskResult result;

    if (mode == PromptMode::halo) {
        Query q{item.question, item.item_id};

        auto t0 = std::chrono::steady_clock::now();
        result.queries = expand(q, ctx.config.expansion.target_n, *ctx.gateway,
                                ctx.config.expansion);
        result.expand_ms = ms_since(t0);

        t0 = std::chrono::steady_clock::now();
        CandidatePool pool = build_pool(result.queries, ctx.config.per_query_max, ctx.sources);
        result.warnings = pool.warnings;
        result.retrieve_ms = ms_since(t0);

        std::vector<Chunk> chunks;
        for (const auto& doc : pool.documents) {
            auto doc_chunks =
                chunk_document(doc, ctx.config.max_chunk_chars, ctx.config.overlap_chars);
            chunks.insert(chunks.end(), doc_chunks.begin(), doc_chunks.end());
        }

        t0 = std::chrono::steady_clock::now();
        if (!chunks.empty()) {
            RelevanceMatrix matrix = build_matrix(chunks, result.queries, option_texts(item),
                                                  *ctx.embeddings, ctx.config.mmr);
            result.selection = select(matrix, ctx.config.mmr);
            std::map<std::string, const Chunk*> by_id;
            for (const auto& c : chunks)
                by_id[c.parent_doc_id + "#" + std::to_string(c.ordinal)] = &c;
            for (const auto& pick : result.selection.picks)
                result.selected_chunks.push_back(*by_id.at(pick.chunk_id));
        } else {
            result.warnings.push_back("retrieval produced no chunks; answering without context");
        }
        result.select_ms = ms_since(t0);
    } else {
        result.queries.original = Query{item.question, item.item_id};
    }

    PromptBundle bundle = assemble(item, result.selected_chunks, mode);
    result.bundle = bundle;

    ChatRequest req;
    req.system_text = bundle.system_text;
    req.user_text = bundle.user_text;
    req.temperature = ctx.config.answer_temperature;
    req.max_output_tokens = ctx.config.answer_max_tokens;
    req.model_id = ctx.config.answer_model_id;

    auto t0 = std::chrono::steady_clock::now();
    ChatResponse resp = ctx.gateway->complete(req);
    result.answer_ms = ms_since(t0);

    result.parsed = parse_answer(resp.text, item.options);
    return result;
}

}  // namespace halo
