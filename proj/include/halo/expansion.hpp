#pragma once

#include <string>
#include <vector>

#include "halo/gateway.hpp"

namespace halo {

struct Query {
    std::string text;
    std::string id;
};

// Original question plus its generated rephrasings. Members are unique
// under casefold + whitespace-normalized comparison and the original is
// never echoed into variants.
struct ExpandedQuerySet {
    Query original;
    std::vector<Query> variants;

    size_t n() const { return variants.size(); }

    // The query list the downstream pipeline scores against: original first.
    std::vector<Query> all_queries() const;
};

struct ExpansionConfig {
    int target_n = 3;
    double temperature = 0.7;  // expansion wants diverse wordings
    std::string model_id;
    std::string prompt_template;  // empty = built-in; placeholders {question}, {count}
};

// Break raw LLM output into distinct query lines: split, trim, strip
// leading enumeration markers, drop empties, dedup casefold (first wins).
std::vector<std::string> parse_line_list(const std::string& raw);

// Deterministic template instantiation for the expansion request.
ChatRequest expansion_prompt(const Query& q, int target_n, const ExpansionConfig& cfg = {});

// One gateway call (plus at most one retry on empty parse); degrades to
// zero variants rather than failing on unparseable output.
ExpandedQuerySet expand(const Query& q, int target_n, Gateway& gateway,
                        const ExpansionConfig& cfg = {});

}  // namespace halo
