#pragma once

#include <string>
#include <vector>

#include "halo/embedding.hpp"
#include "halo/expansion.hpp"
#include "halo/retrieval.hpp"

namespace halo {

struct MmrConfig {
    double lambda = 0.7;  // relevance weight; 1-lambda weights diversity
    int k = 5;            // selection budget
    bool include_options_in_query_text = true;
};

// Precomputed scores the greedy argmax scans: rel is chunks x queries,
// sim is chunks x chunks (symmetric, unit diagonal).
struct RelevanceMatrix {
    std::vector<std::vector<double>> rel;
    std::vector<std::vector<double>> sim;
    std::vector<std::string> chunk_ids;
    std::vector<std::string> query_ids;

    size_t num_chunks() const { return chunk_ids.size(); }
    size_t num_queries() const { return query_ids.size(); }
};

struct SelectionPick {
    std::string chunk_id;
    int chunk_index = 0;
    double score = 0.0;
    double mean_rel = 0.0;
    double max_sim_to_selected = 0.0;
};

struct SelectionState {
    std::vector<SelectionPick> picks;

    std::vector<std::string> selected_ids() const;
    std::vector<double> scores() const;
};

// lambda * meanRel(i) - (1-lambda) * max_{j in S} sim(i,j); the max over
// an empty S is 0.
double mmr_score(size_t chunk_index, const RelevanceMatrix& m,
                 const std::vector<int>& selected, double lambda);

// Greedy selection: min(k, num_chunks) picks, argmax per round, ties
// broken by smallest chunk index. Deterministic for fixed inputs.
SelectionState select(const RelevanceMatrix& m, const MmrConfig& cfg);

// Embed chunks and queries (query text optionally extended with the
// answer options) and fill rel/sim.
RelevanceMatrix build_matrix(const std::vector<Chunk>& chunks, const ExpandedQuerySet& qs,
                             const std::vector<std::string>& options, EmbeddingStore& store,
                             const MmrConfig& cfg);

// Per-pick audit record as JSON text.
std::string selection_trace_json(const SelectionState& state);

}  // namespace halo
