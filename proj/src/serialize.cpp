#include "halo/serialize.hpp"

#include <json.hpp>

#include "halo/errors.hpp"

namespace halo {

using nlohmann::json;

namespace {

json query_to_json(const Query& q) { return {{"text", q.text}, {"id", q.id}}; }

Query query_from_json(const json& doc) {
    return Query{doc.at("text").get<std::string>(), doc.at("id").get<std::string>()};
}

}  // namespace

std::string query_set_to_json(const ExpandedQuerySet& qs) {
    json variants = json::array();
    for (const auto& v : qs.variants) variants.push_back(query_to_json(v));
    json doc = {{"original", query_to_json(qs.original)},
                {"variants", variants},
                {"n", qs.n()}};
    return doc.dump(2);
}

ExpandedQuerySet query_set_from_json(const std::string& text) {
    json doc = json::parse(text);
    ExpandedQuerySet qs;
    qs.original = query_from_json(doc.at("original"));
    for (const auto& v : doc.at("variants")) qs.variants.push_back(query_from_json(v));
    return qs;
}

std::string pool_to_json(const CandidatePool& pool) {
    json docs = json::array();
    for (const auto& d : pool.documents) {
        json retrieved_by = json::array();
        for (const auto& id : d.retrieved_by) retrieved_by.push_back(id);
        docs.push_back({{"doc_id", d.doc_id},
                        {"title", d.title},
                        {"body", d.body},
                        {"source", d.source == DocSource::pubmed ? "pubmed" : "local"},
                        {"retrieved_by", retrieved_by},
                        {"fetched_at", d.fetched_at}});
    }
    json warnings = json::array();
    for (const auto& w : pool.warnings) warnings.push_back(w);
    json doc = {{"documents", docs},
                {"query_set", json::parse(query_set_to_json(pool.query_set))},
                {"warnings", warnings}};
    return doc.dump(2);
}

CandidatePool pool_from_json(const std::string& text) {
    json doc = json::parse(text);
    CandidatePool pool;
    pool.query_set = query_set_from_json(doc.at("query_set").dump());
    for (const auto& d : doc.at("documents")) {
        Document document;
        document.doc_id = d.at("doc_id").get<std::string>();
        document.title = d.value("title", "");
        document.body = d.at("body").get<std::string>();
        document.source = d.value("source", "local") == "pubmed" ? DocSource::pubmed
                                                                 : DocSource::local;
        for (const auto& id : d.value("retrieved_by", json::array()))
            document.retrieved_by.insert(id.get<std::string>());
        document.fetched_at = d.value("fetched_at", "");
        pool.documents.push_back(std::move(document));
    }
    for (const auto& w : doc.value("warnings", json::array()))
        pool.warnings.push_back(w.get<std::string>());
    return pool;
}

std::string chunks_to_json(const std::vector<Chunk>& chunks) {
    json arr = json::array();
    for (const auto& c : chunks)
        arr.push_back({{"parent_doc_id", c.parent_doc_id},
                       {"ordinal", c.ordinal},
                       {"text", c.text},
                       {"span", {c.span_begin, c.span_end}}});
    return arr.dump(2);
}

std::vector<Chunk> chunks_from_json(const std::string& text) {
    json arr = json::parse(text);
    std::vector<Chunk> chunks;
    for (const auto& c : arr) {
        Chunk chunk;
        chunk.parent_doc_id = c.at("parent_doc_id").get<std::string>();
        chunk.ordinal = c.at("ordinal").get<int>();
        chunk.text = c.at("text").get<std::string>();
        chunk.span_begin = c.at("span").at(0).get<size_t>();
        chunk.span_end = c.at("span").at(1).get<size_t>();
        chunks.push_back(std::move(chunk));
    }
    return chunks;
}

std::string selection_to_json(const SelectionState& state) {
    json picks = json::array();
    for (const auto& p : state.picks)
        picks.push_back({{"chunk_id", p.chunk_id},
                         {"chunk_index", p.chunk_index},
                         {"score", p.score},
                         {"mean_rel", p.mean_rel},
                         {"max_sim_to_selected", p.max_sim_to_selected}});
    return json{{"picks", picks}}.dump(2);
}

SelectionState selection_from_json(const std::string& text) {
    json doc = json::parse(text);
    SelectionState state;
    for (const auto& p : doc.at("picks")) {
        SelectionPick pick;
        pick.chunk_id = p.at("chunk_id").get<std::string>();
        pick.chunk_index = p.value("chunk_index", 0);
        pick.score = p.at("score").get<double>();
        pick.mean_rel = p.value("mean_rel", 0.0);
        pick.max_sim_to_selected = p.value("max_sim_to_selected", 0.0);
        state.picks.push_back(std::move(pick));
    }
    return state;
}

}  // namespace halo
