#include "halo/expansion.hpp"

#include <regex>
#include <set>

#include "halo/errors.hpp"
#include "halo/text_util.hpp"

namespace halo {

namespace {

constexpr const char* kDefaultTemplate =
    "You are an AI language model assistant. Your task is to generate {count} "
    "alternative phrasings of the given medical question to improve document "
    "retrieval. Each rephrasing must keep the original question's meaning while "
    "changing the wording. Output exactly {count} rephrasings, one per line, "
    "with no numbering and no commentary.\n\nQuestion: {question}";

std::string fill_placeholder(std::string text, const std::string& key, const std::string& value) {
    size_t pos = 0;
    while ((pos = text.find(key, pos)) != std::string::npos) {
        text.replace(pos, key.size(), value);
        pos += value.size();
    }
    return text;
}

}  // namespace

std::vector<Query> ExpandedQuerySet::all_queries() const {
    std::vector<Query> out;
    out.reserve(1 + variants.size());
    out.push_back(original);
    out.insert(out.end(), variants.begin(), variants.end());
    return out;
}

std::vector<std::string> parse_line_list(const std::string& raw) {
    static const std::regex marker(R"(^\s*(\d+[\.\)]|[-*\x95])\s*)");
    // \x95 above covers a stray bullet byte; the UTF-8 bullet is handled below.
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& line : split_lines(raw)) {
        std::string s = std::regex_replace(line, marker, "");
        // Strip a UTF-8 bullet (0xE2 0x80 0xA2) the regex cannot express.
        std::string t = trim(s);
        if (t.rfind("\xE2\x80\xA2", 0) == 0) t = trim(t.substr(3));
        if (t.empty()) continue;
        std::string key = to_lower(t);
        if (seen.insert(key).second) out.push_back(t);
    }
    return out;
}

ChatRequest expansion_prompt(const Query& q, int target_n, const ExpansionConfig& cfg) {
    std::string tpl = cfg.prompt_template.empty() ? kDefaultTemplate : cfg.prompt_template;
    std::string user = fill_placeholder(tpl, "{count}", std::to_string(target_n));
    user = fill_placeholder(user, "{question}", q.text);
    ChatRequest req;
    req.system_text = "You rewrite medical questions into alternative phrasings.";
    req.user_text = user;
    req.temperature = cfg.temperature;
    req.model_id = cfg.model_id;
    return req;
}

ExpandedQuerySet expand(const Query& q, int target_n, Gateway& gateway,
                        const ExpansionConfig& cfg) {
    if (target_n < 1) throw PreconditionViolation("target_n must be >= 1");
    if (trim(q.text).empty()) throw PreconditionViolation("query text must be non-empty");

    ExpandedQuerySet result;
    result.original = q;

    std::string original_key = normalize_for_compare(q.text);

    auto attempt = [&]() -> std::vector<Query> {
        ChatRequest req = expansion_prompt(q, target_n, cfg);
        ChatResponse resp = gateway.complete(req);
        std::vector<Query> variants;
        std::set<std::string> seen{original_key};
        int idx = 0;
        for (const auto& line : parse_line_list(resp.text)) {
            std::string key = normalize_for_compare(line);
            if (!seen.insert(key).second) continue;  // duplicate or original echo
            variants.push_back(Query{line, q.id + "/v" + std::to_string(idx++)});
            if (static_cast<int>(variants.size()) >= target_n) break;
        }
        return variants;
    };

    result.variants = attempt();
    if (result.variants.empty()) {
        // One retry on empty parse, then graceful degradation to {q}.
        result.variants = attempt();
    }
    return result;
}

}  // namespace halo
