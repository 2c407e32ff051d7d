#include "halo/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include <json.hpp>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "halo/errors.hpp"
#include "halo/text_util.hpp"

namespace halo {

using nlohmann::json;

namespace {

std::string utc_now_iso8601() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string url_decode(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size()) {
            out.push_back(static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16)));
            i += 2;
        } else if (s[i] == '+') {
            out.push_back(' ');
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

std::map<std::string, std::string> query_params(const std::string& url) {
    std::map<std::string, std::string> params;
    auto qpos = url.find('?');
    if (qpos == std::string::npos) return params;
    for (const auto& pair : split(url.substr(qpos + 1), '&')) {
        auto eq = pair.find('=');
        if (eq == std::string::npos) continue;
        params[pair.substr(0, eq)] = url_decode(pair.substr(eq + 1));
    }
    return params;
}

std::string decode_entities(std::string s) {
    static const std::pair<const char*, const char*> table[] = {
        {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&apos;", "'"}, {"&amp;", "&"},
    };
    for (const auto& [from, to] : table) {
        size_t pos = 0;
        while ((pos = s.find(from, pos)) != std::string::npos) {
            s.replace(pos, std::strlen(from), to);
            pos += std::strlen(to);
        }
    }
    return s;
}

std::string strip_tags(const std::string& s) {
    std::string out;
    bool in_tag = false;
    for (char c : s) {
        if (c == '<') in_tag = true;
        else if (c == '>') in_tag = false;
        else if (!in_tag) out.push_back(c);
    }
    return out;
}

struct XmlElement {
    std::string attrs;
    std::string inner;
};

// Minimal extraction of <Tag ...>inner</Tag> blocks; enough for the
// fixed shape of E-utilities abstract XML.
std::vector<XmlElement> find_elements(const std::string& xml, const std::string& tag) {
    std::vector<XmlElement> out;
    std::string open = "<" + tag;
    std::string close = "</" + tag + ">";
    size_t pos = 0;
    while ((pos = xml.find(open, pos)) != std::string::npos) {
        size_t after = pos + open.size();
        if (after < xml.size() && xml[after] != '>' && xml[after] != ' ' && xml[after] != '\t' &&
            xml[after] != '\n' && xml[after] != '/') {
            pos = after;  // prefix of a longer tag name
            continue;
        }
        size_t gt = xml.find('>', after);
        if (gt == std::string::npos) break;
        if (xml[gt - 1] == '/') {  // self-closing
            out.push_back({xml.substr(after, gt - 1 - after), ""});
            pos = gt + 1;
            continue;
        }
        size_t end = xml.find(close, gt + 1);
        if (end == std::string::npos) break;
        out.push_back({xml.substr(after, gt - after), xml.substr(gt + 1, end - gt - 1)});
        pos = end + close.size();
    }
    return out;
}

std::string attr_value(const std::string& attrs, const std::string& name) {
    std::regex re(name + R"(\s*=\s*\"([^\"]*)\")");
    std::smatch m;
    if (std::regex_search(attrs, m, re)) return m[1].str();
    return {};
}

std::vector<std::string> tokenize_casefold(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

}  // namespace

HttpGetter live_http_getter() {
    return [](const std::string& url) -> std::string {
        std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
        std::smatch m;
        if (!std::regex_match(url, m, url_re)) throw NetworkError("bad URL: " + url);
        httplib::Client client(m[1].str());
        client.set_read_timeout(60, 0);
        auto res = client.Get(m[2].matched ? m[2].str() : "/");
        if (!res) throw NetworkError("connection failed: " + url);
        if (res->status < 200 || res->status >= 300)
            throw NetworkError("HTTP " + std::to_string(res->status) + " for " + url);
        return res->body;
    };
}

HttpGetter replay_getter_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open replay fixture " + path);
    json doc = json::parse(in);
    auto fixture = std::make_shared<json>(std::move(doc));
    return [fixture](const std::string& url) -> std::string {
        auto params = query_params(url);
        if (url.find("esearch.fcgi") != std::string::npos) {
            const auto& table = fixture->at("esearch");
            auto it = table.find(params["term"]);
            if (it != table.end()) return it->get<std::string>();
            throw NetworkError("replay fixture has no esearch entry for term '" + params["term"] + "'");
        }
        if (url.find("efetch.fcgi") != std::string::npos) {
            const auto& table = fixture->at("efetch");
            auto it = table.find(params["id"]);
            if (it != table.end()) return it->get<std::string>();
            throw NetworkError("replay fixture has no efetch entry for ids '" + params["id"] + "'");
        }
        throw NetworkError("replay fixture cannot serve " + url);
    };
}

PubMedClient::PubMedClient(HttpGetter getter, std::shared_ptr<RateLimiter> limiter, Options opts)
    : getter_(std::move(getter)), limiter_(std::move(limiter)), opts_(std::move(opts)) {}

std::vector<std::string> PubMedClient::search(const Query& query, int max_results) {
    std::string url = opts_.base_url + "/esearch.fcgi?db=pubmed&term=" + url_encode(query.text) +
                      "&retmax=" + std::to_string(max_results) + "&retmode=json";
    if (const char* key = std::getenv(opts_.api_key_env_var.c_str()); key && *key)
        url += "&api_key=" + url_encode(key);

    if (limiter_) limiter_->acquire();
    std::string body = getter_(url);

    try {
        json doc = json::parse(body);
        std::vector<std::string> pmids;
        for (const auto& id : doc.at("esearchresult").at("idlist")) {
            std::string pmid = id.get<std::string>();
            if (pmid.empty() || !std::all_of(pmid.begin(), pmid.end(),
                                             [](unsigned char c) { return std::isdigit(c); }))
                throw MalformedResponse("non-numeric PMID in idlist: " + pmid);
            pmids.push_back(pmid);
        }
        return pmids;
    } catch (const json::exception& e) {
        throw MalformedResponse(std::string("cannot parse esearch response: ") + e.what());
    }
}

PubMedClient::FetchResult PubMedClient::fetch(const std::vector<std::string>& pmids) {
    if (pmids.empty()) throw PreconditionViolation("pubmed_fetch requires a non-empty PMID list");

    std::string joined;
    for (size_t i = 0; i < pmids.size(); ++i) {
        if (i) joined += ",";
        joined += pmids[i];
    }
    std::string url = opts_.base_url + "/efetch.fcgi?db=pubmed&id=" + joined +
                      "&rettype=abstract&retmode=xml";
    if (const char* key = std::getenv(opts_.api_key_env_var.c_str()); key && *key)
        url += "&api_key=" + url_encode(key);

    if (limiter_) limiter_->acquire();
    std::string xml = getter_(url);

    if (xml.find("<PubmedArticleSet") == std::string::npos)
        throw MalformedResponse("efetch response is not a PubmedArticleSet");

    FetchResult result;
    std::string stamp = utc_now_iso8601();
    for (const auto& article : find_elements(xml, "PubmedArticle")) {
        auto pmid_els = find_elements(article.inner, "PMID");
        std::string pmid = pmid_els.empty() ? "" : trim(strip_tags(pmid_els.front().inner));
        if (pmid.empty()) {
            result.warnings.push_back("article without PMID skipped");
            continue;
        }

        auto title_els = find_elements(article.inner, "ArticleTitle");
        std::string title =
            title_els.empty() ? "" : decode_entities(trim(strip_tags(title_els.front().inner)));

        std::string body;
        for (const auto& abs : find_elements(article.inner, "AbstractText")) {
            std::string text = decode_entities(trim(strip_tags(abs.inner)));
            if (text.empty()) continue;
            std::string label = attr_value(abs.attrs, "Label");
            if (!body.empty()) body += " ";
            if (!label.empty()) body += label + ": ";
            body += text;
        }
        if (body.empty()) {
            result.warnings.push_back("PMID " + pmid + " has no abstract, skipped");
            continue;
        }

        Document doc;
        doc.doc_id = "pmid:" + pmid;
        doc.title = title;
        doc.body = body;
        doc.source = DocSource::pubmed;
        doc.fetched_at = stamp;
        result.documents.push_back(std::move(doc));
    }
    return result;
}

IngestResult ingest_local(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file " + path);

    IngestResult result;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            json doc = json::parse(line);
            std::string id = doc.at("id").get<std::string>();
            std::string body = doc.at("body").get<std::string>();
            if (trim(body).empty()) {
                result.warnings.push_back("line " + std::to_string(lineno) + ": empty body");
                continue;
            }
            Document d;
            d.doc_id = id;
            d.title = doc.value("title", "");
            d.body = body;
            d.source = DocSource::local;
            result.documents.push_back(std::move(d));
        } catch (const json::exception& e) {
            result.warnings.push_back("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return result;
}

std::vector<Chunk> chunk_document(const Document& doc, size_t max_chunk_chars,
                                  size_t overlap_chars) {
    if (max_chunk_chars == 0) throw PreconditionViolation("max_chunk_chars must be positive");
    if (overlap_chars >= max_chunk_chars)
        throw PreconditionViolation("overlap_chars must be smaller than max_chunk_chars");

    const std::string& body = doc.body;
    std::vector<Chunk> chunks;
    size_t pos = 0;
    int ordinal = 0;
    while (pos < body.size()) {
        size_t end = std::min(pos + max_chunk_chars, body.size());
        if (end < body.size()) {
            // Prefer the sentence boundary nearest below the limit.
            size_t boundary = std::string::npos;
            for (size_t i = end; i > pos + 1; --i) {
                char c = body[i - 2];
                if ((c == '.' || c == '?' || c == '!') && body[i - 1] == ' ') {
                    boundary = i - 1;  // end right after the punctuation
                    break;
                }
            }
            if (boundary != std::string::npos && boundary > pos) end = boundary;
        }
        Chunk c;
        c.parent_doc_id = doc.doc_id;
        c.ordinal = ordinal++;
        c.span_begin = pos;
        c.span_end = end;
        c.text = body.substr(pos, end - pos);
        chunks.push_back(std::move(c));
        if (end >= body.size()) break;
        pos = (overlap_chars > 0 && end > overlap_chars) ? end - overlap_chars : end;
    }
    return chunks;
}

LocalCorpus::LocalCorpus(std::vector<Document> docs) : docs_(std::move(docs)) {}

LocalCorpus LocalCorpus::from_file(const std::string& path) {
    return LocalCorpus(ingest_local(path).documents);
}

std::vector<Document> LocalCorpus::search(const Query& query, int max_results) const {
    auto q_tokens = tokenize_casefold(query.text);
    std::set<std::string> q_set(q_tokens.begin(), q_tokens.end());

    std::vector<std::pair<int, const Document*>> scored;
    for (const auto& doc : docs_) {
        std::set<std::string> d_set;
        for (auto& t : tokenize_casefold(doc.title + " " + doc.body)) d_set.insert(std::move(t));
        int score = 0;
        for (const auto& t : q_set)
            if (d_set.count(t)) ++score;
        if (score > 0) scored.emplace_back(score, &doc);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second->doc_id < b.second->doc_id;
    });

    std::vector<Document> out;
    for (const auto& [score, doc] : scored) {
        if (static_cast<int>(out.size()) >= max_results) break;
        out.push_back(*doc);
    }
    return out;
}

CandidatePool build_pool(const ExpandedQuerySet& qs, int per_query_max,
                         const SourceConfig& sources) {
    if (!sources.pubmed && !sources.local)
        throw PreconditionViolation("build_pool requires at least one enabled source");

    CandidatePool pool;
    pool.query_set = qs;

    std::map<std::string, Document> merged;
    size_t failures = 0;
    auto queries = qs.all_queries();

    for (const auto& query : queries) {
        try {
            std::vector<Document> docs;
            if (sources.pubmed) {
                auto pmids = sources.pubmed->search(query, per_query_max);
                if (!pmids.empty()) {
                    auto fetched = sources.pubmed->fetch(pmids);
                    docs.insert(docs.end(), fetched.documents.begin(), fetched.documents.end());
                    pool.warnings.insert(pool.warnings.end(), fetched.warnings.begin(),
                                         fetched.warnings.end());
                }
            }
            if (sources.local) {
                auto local = sources.local->search(query, per_query_max);
                docs.insert(docs.end(), local.begin(), local.end());
            }
            for (auto& doc : docs) {
                auto [it, inserted] = merged.emplace(doc.doc_id, doc);
                it->second.retrieved_by.insert(query.id);
            }
        } catch (const Error& e) {
            ++failures;
            pool.warnings.push_back("query '" + query.id + "' failed: " + e.what());
        }
    }

    if (failures == queries.size())
        throw RetrievalFailed("every retrieval query failed; see warnings");

    for (auto& [id, doc] : merged) pool.documents.push_back(std::move(doc));
    return pool;
}

}  // namespace halo
