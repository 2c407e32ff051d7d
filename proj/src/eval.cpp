#include "halo/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

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

const char* rule_name(ParseRule rule) {
    switch (rule) {
        case ParseRule::exact_letter: return "exact_letter";
        case ParseRule::answer_phrase: return "answer_phrase";
        case ParseRule::option_text_match: return "option_text_match";
        default: return "failed";
    }
}

ParseRule rule_from_name(const std::string& name) {
    if (name == "exact_letter") return ParseRule::exact_letter;
    if (name == "answer_phrase") return ParseRule::answer_phrase;
    if (name == "option_text_match") return ParseRule::option_text_match;
    return ParseRule::failed;
}

json item_result_to_json(const ItemResult& r) {
    json doc = {{"item_id", r.item_id},
                {"mode", mode_name(r.mode)},
                {"choice", r.parsed.choice ? std::string(1, *r.parsed.choice) : ""},
                {"parse_rule", rule_name(r.parsed.parse_rule)},
                {"correct", r.correct},
                {"error", r.error},
                {"timing_ms",
                 {{"expand", r.expand_ms},
                  {"retrieve", r.retrieve_ms},
                  {"select", r.select_ms},
                  {"answer", r.answer_ms}}}};
    return doc;
}

ItemResult item_result_from_json(const json& doc) {
    ItemResult r;
    r.item_id = doc.at("item_id").get<std::string>();
    r.mode = mode_from_name(doc.at("mode").get<std::string>());
    std::string choice = doc.value("choice", "");
    if (!choice.empty()) r.parsed.choice = choice[0];
    r.parsed.parse_rule = rule_from_name(doc.value("parse_rule", "failed"));
    r.correct = doc.value("correct", false);
    r.error = doc.value("error", "");
    if (doc.contains("timing_ms")) {
        const auto& t = doc["timing_ms"];
        r.expand_ms = t.value("expand", 0L);
        r.retrieve_ms = t.value("retrieve", 0L);
        r.select_ms = t.value("select", 0L);
        r.answer_ms = t.value("answer", 0L);
    }
    return r;
}

}  // namespace

std::string mode_name(PromptMode mode) {
    return mode == PromptMode::baseline ? "baseline" : "halo";
}

PromptMode mode_from_name(const std::string& name) {
    if (name == "baseline") return PromptMode::baseline;
    if (name == "halo") return PromptMode::halo;
    throw Error("unknown mode: " + name);
}

LoadResult load_dataset(const std::string& path, Split split) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset " + path);

    LoadResult result;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto warn = [&](const std::string& msg) {
            result.warnings.push_back("line " + std::to_string(lineno) + ": " + msg);
        };
        try {
            json doc = json::parse(line);
            McqItem item;
            if (doc.contains("id") && doc["id"].is_string())
                item.item_id = doc["id"].get<std::string>();
            else
                item.item_id = "line-" + std::to_string(lineno);
            item.question = doc.at("question").get<std::string>();
            if (trim(item.question).empty()) {
                warn("empty question, skipped");
                continue;
            }

            static const char* keys[] = {"opa", "opb", "opc", "opd", "ope"};
            int max_opts = (split == Split::custom) ? 5 : 4;
            for (int i = 0; i < max_opts; ++i) {
                if (!doc.contains(keys[i])) {
                    if (i < 4) {
                        item.options.clear();  // opa..opd are mandatory
                        break;
                    }
                    continue;  // ope is optional in custom split
                }
                item.options.push_back(
                    {static_cast<char>('A' + i), doc[keys[i]].get<std::string>()});
            }
            if (item.options.size() < 4) {
                warn("missing option field, skipped");
                continue;
            }

            if (!doc.contains("cop") || !doc["cop"].is_number_integer()) {
                warn("missing gold answer (cop), skipped");
                continue;
            }
            int cop = doc["cop"].get<int>();
            if (cop < 0 || cop >= static_cast<int>(item.options.size())) {
                warn("cop out of range, skipped");
                continue;
            }
            item.gold = static_cast<char>('A' + cop);
            item.subject = doc.value("subject_name", "");
            item.topic = doc.value("topic_name", "");
            result.items.push_back(std::move(item));
        } catch (const json::exception& e) {
            warn(e.what());
        }
    }
    if (result.items.empty()) throw EmptyDataset("no valid items in " + path);
    return result;
}

std::vector<McqItem> filter_items(const std::vector<McqItem>& items,
                                  const std::vector<std::string>& subjects,
                                  const std::vector<std::string>& keywords) {
    std::vector<McqItem> out;
    for (const auto& item : items) {
        if (!subjects.empty()) {
            bool hit = false;
            for (const auto& s : subjects)
                if (to_lower(item.subject) == to_lower(s)) hit = true;
            if (!hit) continue;
        }
        if (!keywords.empty()) {
            std::string haystack = item.question;
            for (const auto& opt : item.options) haystack += " " + opt.text;
            bool hit = false;
            for (const auto& kw : keywords)
                if (contains_casefold(haystack, kw)) hit = true;
            if (!hit) continue;
        }
        out.push_back(item);
    }
    return out;
}

std::vector<McqItem> sample_items(std::vector<McqItem> items, const SampleSpec& spec) {
    // Fisher-Yates with mt19937 indices taken by modulo so the order is
    // identical across standard library implementations.
    std::mt19937_64 rng(spec.seed);
    for (size_t i = items.size(); i > 1; --i) {
        size_t j = rng() % i;
        std::swap(items[i - 1], items[j]);
    }
    if (items.size() > spec.size) items.resize(spec.size);
    return items;
}

std::vector<SubjectRow> aggregate_by_subject(const std::vector<ItemResult>& results,
                                             const std::vector<McqItem>& items) {
    std::map<std::string, const McqItem*> by_id;
    for (const auto& item : items) by_id[item.item_id] = &item;

    std::map<std::string, SubjectRow> rows;
    for (const auto& r : results) {
        auto it = by_id.find(r.item_id);
        if (it == by_id.end()) throw Error("unknown item_id in results: " + r.item_id);
        std::string subject = it->second->subject.empty() ? "(none)" : it->second->subject;
        auto& row = rows[subject];
        row.subject = subject;
        row.n_items += 1;
        if (r.correct) row.n_correct += 1;
    }

    std::vector<SubjectRow> out;
    for (auto& [name, row] : rows) out.push_back(row);  // map order = sorted by subject
    return out;
}

EvalReport run_eval(const EvalConfig& cfg, PipelineContext& ctx) {
    EvalReport report;
    report.started_at = utc_now_iso8601();

    auto loaded = load_dataset(cfg.dataset_path, cfg.split);
    std::vector<McqItem> items = filter_items(loaded.items, cfg.subjects, cfg.keywords);
    if (cfg.sample) items = sample_items(std::move(items), *cfg.sample);
    if (items.empty()) throw EmptyDataset("no items left after filtering/sampling");

    {
        json echo = {{"dataset_path", cfg.dataset_path},
                     {"split", cfg.split == Split::dev ? "dev"
                              : cfg.split == Split::test ? "test"
                                                         : "custom"},
                     {"parallelism", cfg.parallelism},
                     {"subjects", cfg.subjects},
                     {"keywords", cfg.keywords},
                     {"lambda", ctx.config.mmr.lambda},
                     {"k", ctx.config.mmr.k},
                     {"target_n", ctx.config.expansion.target_n},
                     {"per_query_max", ctx.config.per_query_max}};
        if (cfg.sample)
            echo["sample"] = {{"size", cfg.sample->size}, {"seed", cfg.sample->seed}};
        report.config_echo = echo.dump();
    }

    // Resume: skip (mode, item_id) pairs already checkpointed.
    std::set<std::pair<std::string, std::string>> done;
    std::vector<ItemResult> restored;
    if (cfg.resume && !cfg.checkpoint_path.empty()) {
        std::ifstream in(cfg.checkpoint_path);
        std::string line;
        while (in && std::getline(in, line)) {
            if (trim(line).empty()) continue;
            ItemResult r = item_result_from_json(json::parse(line));
            done.emplace(mode_name(r.mode), r.item_id);
            restored.push_back(std::move(r));
        }
    }

    struct Task {
        const McqItem* item;
        PromptMode mode;
    };
    std::vector<Task> tasks;
    for (PromptMode mode : cfg.modes)
        for (const auto& item : items)
            if (!done.count({mode_name(mode), item.item_id})) tasks.push_back({&item, mode});

    std::vector<ItemResult> results(tasks.size());
    std::atomic<size_t> next{0};
    std::atomic<size_t> provider_failures{0};
    std::mutex ckpt_mu;
    std::ofstream ckpt;
    if (!cfg.checkpoint_path.empty())
        ckpt.open(cfg.checkpoint_path, cfg.resume ? std::ios::app : std::ios::trunc);

    auto worker = [&]() {
        while (true) {
            size_t idx = next.fetch_add(1);
            if (idx >= tasks.size()) return;
            const Task& task = tasks[idx];
            ItemResult r;
            r.item_id = task.item->item_id;
            r.mode = task.mode;
            try {
                AskResult ask = answer_item(*task.item, task.mode, ctx);
                r.parsed = ask.parsed;
                r.correct = ask.parsed.choice && *ask.parsed.choice == task.item->gold;
                r.expand_ms = ask.expand_ms;
                r.retrieve_ms = ask.retrieve_ms;
                r.select_ms = ask.select_ms;
                r.answer_ms = ask.answer_ms;
            } catch (const Error& e) {
                r.error = e.what();
                r.correct = false;
                provider_failures.fetch_add(1);
            }
            results[idx] = r;
            if (ckpt.is_open()) {
                std::lock_guard lock(ckpt_mu);
                ckpt << item_result_to_json(r).dump() << "\n";
                ckpt.flush();
            }
        }
    };

    int n_threads = std::max(1, cfg.parallelism);
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    if (!tasks.empty() && provider_failures.load() == tasks.size())
        throw Error("every item failed; provider unusable");

    std::vector<ItemResult> all = std::move(restored);
    all.insert(all.end(), results.begin(), results.end());

    // Deterministic ordering regardless of completion interleaving.
    std::sort(all.begin(), all.end(), [](const ItemResult& a, const ItemResult& b) {
        if (a.mode != b.mode) return mode_name(a.mode) < mode_name(b.mode);
        return a.item_id < b.item_id;
    });
    report.items = all;

    for (PromptMode mode : cfg.modes) {
        ModeStats stats;
        std::vector<ItemResult> mode_results;
        for (const auto& r : all)
            if (r.mode == mode) mode_results.push_back(r);
        stats.item_count = static_cast<int>(mode_results.size());
        for (const auto& r : mode_results) {
            if (r.correct) ++stats.correct_count;
            if (r.parsed.parse_rule == ParseRule::failed && r.error.empty())
                ++stats.parse_failures;
        }
        stats.subjects = aggregate_by_subject(mode_results, items);
        report.per_mode[mode_name(mode)] = std::move(stats);
    }

    report.finished_at = utc_now_iso8601();
    return report;
}

std::string report_to_json(const EvalReport& report) {
    json modes = json::object();
    for (const auto& [name, stats] : report.per_mode) {
        json subjects = json::array();
        for (const auto& row : stats.subjects)
            subjects.push_back({{"subject", row.subject},
                                {"n_items", row.n_items},
                                {"n_correct", row.n_correct},
                                {"accuracy", row.accuracy()}});
        modes[name] = {{"item_count", stats.item_count},
                       {"correct_count", stats.correct_count},
                       {"parse_failures", stats.parse_failures},
                       {"accuracy", stats.accuracy()},
                       {"subjects", subjects}};
    }
    json items = json::array();
    for (const auto& r : report.items) items.push_back(item_result_to_json(r));

    json doc = {{"schema", report.schema},
                {"config", json::parse(report.config_echo.empty() ? "{}" : report.config_echo)},
                {"modes", modes},
                {"items", items},
                {"started_at", report.started_at},
                {"finished_at", report.finished_at}};
    return doc.dump(2);
}

EvalReport report_from_json(const std::string& text) {
    json doc = json::parse(text);
    EvalReport report;
    report.schema = doc.at("schema").get<std::string>();
    if (report.schema != "halo-report/1")
        throw MalformedResponse("unsupported report schema: " + report.schema);
    report.config_echo = doc.at("config").dump();
    for (const auto& [name, stats_json] : doc.at("modes").items()) {
        ModeStats stats;
        stats.item_count = stats_json.at("item_count").get<int>();
        stats.correct_count = stats_json.at("correct_count").get<int>();
        stats.parse_failures = stats_json.at("parse_failures").get<int>();
        for (const auto& row_json : stats_json.at("subjects")) {
            SubjectRow row;
            row.subject = row_json.at("subject").get<std::string>();
            row.n_items = row_json.at("n_items").get<int>();
            row.n_correct = row_json.at("n_correct").get<int>();
            stats.subjects.push_back(std::move(row));
        }
        report.per_mode[name] = std::move(stats);
    }
    for (const auto& item_json : doc.at("items"))
        report.items.push_back(item_result_from_json(item_json));
    report.started_at = doc.value("started_at", "");
    report.finished_at = doc.value("finished_at", "");
    return report;
}

std::string report_to_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "mode,subject,n_items,n_correct,accuracy\n";
    for (const auto& [name, stats] : report.per_mode) {
        for (const auto& row : stats.subjects)
            out << name << "," << row.subject << "," << row.n_items << "," << row.n_correct
                << "," << row.accuracy() << "\n";
        out << name << ",OVERALL," << stats.item_count << "," << stats.correct_count << ","
            << stats.accuracy() << "\n";
    }
    return out.str();
}

std::string report_to_markdown(const EvalReport& report, const std::string& model_label) {
    auto fmt = [](double v) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%.2f", v);
        return std::string(buf);
    };
    std::ostringstream out;
    out << "| Models | w/o HALO Acc. | w/ HALO Acc. |\n";
    out << "|---|---|---|\n";
    std::string base = "-", halo = "-";
    if (auto it = report.per_mode.find("baseline"); it != report.per_mode.end())
        base = fmt(it->second.accuracy());
    if (auto it = report.per_mode.find("halo"); it != report.per_mode.end())
        halo = fmt(it->second.accuracy());
    out << "| " << model_label << " | " << base << " | " << halo << " |\n";
    return out.str();
}

void emit_report(const EvalReport& report, ReportFormat format, const std::string& path,
                 const std::string& model_label) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write report to " + path);
    switch (format) {
        case ReportFormat::json: out << report_to_json(report); break;
        case ReportFormat::csv: out << report_to_csv(report); break;
        case ReportFormat::markdown: out << report_to_markdown(report, model_label); break;
    }
}

}  // namespace halo
