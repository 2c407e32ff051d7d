#include "halo/mmr.hpp"

#include <algorithm>

#include <json.hpp>

#include "halo/errors.hpp"

namespace halo {

using nlohmann::json;

std::vector<std::string> SelectionState::selected_ids() const {
    std::vector<std::string> ids;
    ids.reserve(picks.size());
    for (const auto& p : picks) ids.push_back(p.chunk_id);
    return ids;
}

std::vector<double> SelectionState::scores() const {
    std::vector<double> out;
    out.reserve(picks.size());
    for (const auto& p : picks) out.push_back(p.score);
    return out;
}

double mmr_score(size_t chunk_index, const RelevanceMatrix& m,
                 const std::vector<int>& selected, double lambda) {
    if (chunk_index >= m.num_chunks()) throw Error("chunk index out of range");

    const auto& row = m.rel[chunk_index];
    double mean_rel = 0.0;
    for (double r : row) mean_rel += r;
    mean_rel /= static_cast<double>(m.num_queries());

    double max_sim = 0.0;  // empty-S convention
    bool first = true;
    for (int j : selected) {
        double s = m.sim[chunk_index][j];
        if (first || s > max_sim) max_sim = s;  // true max; sims may be negative
        first = false;
    }

    return lambda * mean_rel - (1.0 - lambda) * max_sim;
}

SelectionState select(const RelevanceMatrix& m, const MmrConfig& cfg) {
    if (m.num_chunks() == 0) throw EmptyPool("MMR selection over an empty pool");
    if (cfg.k < 1) throw PreconditionViolation("selection budget k must be >= 1");
    if (cfg.lambda < 0.0 || cfg.lambda > 1.0)
        throw PreconditionViolation("lambda must lie in [0, 1]");

    size_t n_chunks = m.num_chunks();
    size_t n_queries = m.num_queries();

    std::vector<double> mean_rel(n_chunks, 0.0);
    for (size_t i = 0; i < n_chunks; ++i) {
        double sum = 0.0;
        for (double r : m.rel[i]) sum += r;
        mean_rel[i] = sum / static_cast<double>(n_queries);
    }

    // best_sim[i] = max sim to anything already selected; meaningful only
    // once the first pick exists (the max over an empty set is 0 by
    // convention, which round 0 handles directly).
    std::vector<double> best_sim(n_chunks, 0.0);
    std::vector<bool> taken(n_chunks, false);

    SelectionState state;
    size_t rounds = std::min<size_t>(cfg.k, n_chunks);
    for (size_t round = 0; round < rounds; ++round) {
        int best = -1;
        double best_score = 0.0;
        for (size_t i = 0; i < n_chunks; ++i) {
            if (taken[i]) continue;
            double diversity = round == 0 ? 0.0 : best_sim[i];
            double score = cfg.lambda * mean_rel[i] - (1.0 - cfg.lambda) * diversity;
            if (best < 0 || score > best_score) {  // ties keep the smaller index
                best = static_cast<int>(i);
                best_score = score;
            }
        }
        taken[best] = true;
        SelectionPick pick;
        pick.chunk_id = m.chunk_ids[best];
        pick.chunk_index = best;
        pick.score = best_score;
        pick.mean_rel = mean_rel[best];
        pick.max_sim_to_selected = round == 0 ? 0.0 : best_sim[best];
        state.picks.push_back(std::move(pick));

        for (size_t i = 0; i < n_chunks; ++i)
            if (!taken[i])
                best_sim[i] = round == 0 ? m.sim[i][best] : std::max(best_sim[i], m.sim[i][best]);
    }
    return state;
}

RelevanceMatrix build_matrix(const std::vector<Chunk>& chunks, const ExpandedQuerySet& qs,
                             const std::vector<std::string>& options, EmbeddingStore& store,
                             const MmrConfig& cfg) {
    if (chunks.empty()) throw EmptyPool("build_matrix requires a non-empty chunk list");

    RelevanceMatrix m;
    std::vector<Embedding> chunk_embs;
    chunk_embs.reserve(chunks.size());
    for (const auto& c : chunks) {
        m.chunk_ids.push_back(c.parent_doc_id + "#" + std::to_string(c.ordinal));
        chunk_embs.push_back(store.embed_document(c.text));
    }

    std::vector<Embedding> query_embs;
    for (const auto& q : qs.all_queries()) {
        std::string text = q.text;
        if (cfg.include_options_in_query_text && !options.empty()) {
            text += " Options:";
            for (const auto& opt : options) text += " " + opt;
        }
        m.query_ids.push_back(q.id);
        query_embs.push_back(store.embed_query(text));
    }

    m.rel.assign(chunks.size(), std::vector<double>(query_embs.size(), 0.0));
    for (size_t i = 0; i < chunk_embs.size(); ++i)
        for (size_t k = 0; k < query_embs.size(); ++k)
            m.rel[i][k] = relevance(chunk_embs[i], query_embs[k]);

    m.sim.assign(chunks.size(), std::vector<double>(chunks.size(), 0.0));
    for (size_t i = 0; i < chunk_embs.size(); ++i) {
        m.sim[i][i] = 1.0;
        for (size_t j = i + 1; j < chunk_embs.size(); ++j) {
            double s = cosine(chunk_embs[i], chunk_embs[j]);
            m.sim[i][j] = s;
            m.sim[j][i] = s;
        }
    }
    return m;
}

std::string selection_trace_json(const SelectionState& state) {
    json picks = json::array();
    for (const auto& p : state.picks) {
        picks.push_back({{"chunk_id", p.chunk_id},
                         {"score", p.score},
                         {"mean_rel", p.mean_rel},
                         {"max_sim_to_selected", p.max_sim_to_selected}});
    }
    return json{{"picks", picks}}.dump(2);
}

}  // namespace halo
