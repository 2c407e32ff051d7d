#pragma once

#include <string>
#include <vector>

#include "halo/expansion.hpp"
#include "halo/mmr.hpp"
#include "halo/retrieval.hpp"

namespace halo {

// Stage artifacts as plain JSON so CLI stages compose over stdin/stdout.

std::string query_set_to_json(const ExpandedQuerySet& qs);
ExpandedQuerySet query_set_from_json(const std::string& text);

std::string pool_to_json(const CandidatePool& pool);
CandidatePool pool_from_json(const std::string& text);

std::string chunks_to_json(const std::vector<Chunk>& chunks);
std::vector<Chunk> chunks_from_json(const std::string& text);

std::string selection_to_json(const SelectionState& state);
SelectionState selection_from_json(const std::string& text);

}  // namespace halo
