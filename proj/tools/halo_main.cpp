#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "halo/errors.hpp"
#include "halo/eval.hpp"
#include "halo/pipeline.hpp"
#include "halo/serialize.hpp"
#include "halo/text_util.hpp"

namespace {

using namespace halo;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitProvider = 2;
constexpr int kExitUsage = 64;

// Layered configuration: defaults < config file < HALO_* env < flags.
struct AppConfig {
    std::string endpoint;
    std::string model = "gpt-3.5-turbo-16k";
    std::string auth_env = "HALO_API_TOKEN";
    std::string cache_dir;
    bool offline = false;
    std::string mock_path;       // chat mock fixture
    std::string corpus_path;     // local corpus jsonl
    std::string replay_path;     // pubmed replay fixture
    double lambda = 0.7;
    int k = 5;
    int target_n = 3;
    int per_query_max = 5;
    int embed_dim = 64;
    int parallelism = 4;
    double rps_limit = 3.0;
    int max_retries = 4;
    std::string expansion_template_path;
    std::string fewshots_path;

    json to_json() const {
        return {{"endpoint", endpoint},
                {"model", model},
                {"auth_env", auth_env},
                {"cache_dir", cache_dir},
                {"offline", offline},
                {"mock", mock_path},
                {"corpus", corpus_path},
                {"replay", replay_path},
                {"lambda", lambda},
                {"k", k},
                {"target_n", target_n},
                {"per_query_max", per_query_max},
                {"embed_dim", embed_dim},
                {"parallelism", parallelism},
                {"rps_limit", rps_limit},
                {"max_retries", max_retries}};
    }
};

void apply_json(AppConfig& cfg, const json& doc) {
    cfg.endpoint = doc.value("endpoint", cfg.endpoint);
    cfg.model = doc.value("model", cfg.model);
    cfg.auth_env = doc.value("auth_env", cfg.auth_env);
    cfg.cache_dir = doc.value("cache_dir", cfg.cache_dir);
    cfg.offline = doc.value("offline", cfg.offline);
    cfg.mock_path = doc.value("mock", cfg.mock_path);
    cfg.corpus_path = doc.value("corpus", cfg.corpus_path);
    cfg.replay_path = doc.value("replay", cfg.replay_path);
    cfg.lambda = doc.value("lambda", cfg.lambda);
    cfg.k = doc.value("k", cfg.k);
    cfg.target_n = doc.value("target_n", cfg.target_n);
    cfg.per_query_max = doc.value("per_query_max", cfg.per_query_max);
    cfg.embed_dim = doc.value("embed_dim", cfg.embed_dim);
    cfg.parallelism = doc.value("parallelism", cfg.parallelism);
    cfg.rps_limit = doc.value("rps_limit", cfg.rps_limit);
    cfg.max_retries = doc.value("max_retries", cfg.max_retries);
}

void apply_env(AppConfig& cfg) {
    auto env_str = [](const char* name, std::string& out) {
        if (const char* v = std::getenv(name); v && *v) out = v;
    };
    auto env_num = [](const char* name, auto& out) {
        if (const char* v = std::getenv(name); v && *v) out = static_cast<std::decay_t<decltype(out)>>(std::stod(v));
    };
    env_str("HALO_ENDPOINT", cfg.endpoint);
    env_str("HALO_MODEL", cfg.model);
    env_str("HALO_AUTH_ENV", cfg.auth_env);
    env_str("HALO_CACHE_DIR", cfg.cache_dir);
    env_str("HALO_MOCK", cfg.mock_path);
    env_str("HALO_CORPUS", cfg.corpus_path);
    env_str("HALO_REPLAY", cfg.replay_path);
    env_num("HALO_LAMBDA", cfg.lambda);
    env_num("HALO_K", cfg.k);
    env_num("HALO_TARGET_N", cfg.target_n);
    env_num("HALO_PER_QUERY_MAX", cfg.per_query_max);
    env_num("HALO_EMBED_DIM", cfg.embed_dim);
    env_num("HALO_PARALLELISM", cfg.parallelism);
    if (const char* v = std::getenv("HALO_OFFLINE"); v && *v)
        cfg.offline = std::string(v) != "0" && std::string(v) != "false";
}

std::string slurp(const std::string& path) {
    if (path == "-") {
        std::ostringstream buf;
        buf << std::cin.rdbuf();
        return buf.str();
    }
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Backend used when --offline is set but no mock fixture covers a call;
// constructing it is fine, dispatching through it is a hard error.
class ForbiddenBackend : public ChatBackend {
public:
    std::string send(const ChatRequest&, const ProviderConfig&) override {
        throw ProviderError("offline mode: live provider dispatch is forbidden");
    }
};

PipelineContext make_context(const AppConfig& cfg) {
    PipelineContext ctx;

    ProviderConfig provider;
    provider.provider_id = cfg.offline ? "mock" : "http";
    provider.endpoint = cfg.endpoint;
    provider.auth_token_env_var = cfg.auth_env;
    provider.requests_per_second_limit = cfg.rps_limit;
    provider.max_retries = cfg.max_retries;

    std::shared_ptr<ChatBackend> backend;
    if (!cfg.mock_path.empty()) {
        backend = std::make_shared<MockBackend>(MockBackend::from_file(cfg.mock_path));
    } else if (cfg.offline) {
        backend = std::make_shared<ForbiddenBackend>();
    } else {
        if (cfg.endpoint.empty())
            throw Error("no provider endpoint configured; set --endpoint or use --offline --mock");
        backend = std::make_shared<HttpBackend>();
    }

    std::shared_ptr<CacheStore> cache;
    if (!cfg.cache_dir.empty()) cache = std::make_shared<CacheStore>(cfg.cache_dir);
    auto limiter = std::make_shared<RateLimiter>(cfg.rps_limit);

    ctx.gateway = std::make_shared<Gateway>(provider, backend, cache, limiter);
    ctx.embeddings = std::make_shared<EmbeddingStore>(
        std::make_shared<HashEmbedder>(cfg.embed_dim), cache);

    ctx.config.expansion.target_n = cfg.target_n;
    ctx.config.expansion.model_id = cfg.model;
    if (!cfg.expansion_template_path.empty())
        ctx.config.expansion.prompt_template = slurp(cfg.expansion_template_path);
    ctx.config.mmr.lambda = cfg.lambda;
    ctx.config.mmr.k = cfg.k;
    ctx.config.per_query_max = cfg.per_query_max;
    ctx.config.answer_model_id = cfg.model;
    return ctx;
}

// Sources outlive the context they are plugged into.
struct Sources {
    std::unique_ptr<LocalCorpus> local;
    std::unique_ptr<PubMedClient> pubmed;
    std::shared_ptr<RateLimiter> limiter;
};

Sources make_sources(const AppConfig& cfg, PipelineContext& ctx) {
    Sources s;
    if (!cfg.corpus_path.empty()) {
        s.local = std::make_unique<LocalCorpus>(LocalCorpus::from_file(cfg.corpus_path));
        ctx.sources.local = s.local.get();
    }
    if (!cfg.replay_path.empty()) {
        s.limiter = std::make_shared<RateLimiter>(10.0);
        s.pubmed = std::make_unique<PubMedClient>(replay_getter_from_file(cfg.replay_path),
                                                  s.limiter);
        ctx.sources.pubmed = s.pubmed.get();
    } else if (!cfg.offline && cfg.corpus_path.empty()) {
        s.limiter = std::make_shared<RateLimiter>(3.0);
        s.pubmed = std::make_unique<PubMedClient>(live_http_getter(), s.limiter);
        ctx.sources.pubmed = s.pubmed.get();
    }
    return s;
}

McqItem item_from_flags(const std::string& question, const std::vector<std::string>& options,
                        const std::string& item_file) {
    McqItem item;
    if (!item_file.empty()) {
        json doc = json::parse(slurp(item_file));
        item.item_id = doc.value("id", "cli-item");
        item.question = doc.at("question").get<std::string>();
        char label = 'A';
        for (const auto& opt : doc.at("options"))
            item.options.push_back({label++, opt.get<std::string>()});
        std::string gold = doc.value("gold", "");
        if (!gold.empty()) item.gold = gold[0];
        return item;
    }
    item.item_id = "cli-item";
    item.question = question;
    char label = 'A';
    for (const auto& opt : options) item.options.push_back({label++, opt});
    return item;
}

int run(int argc, char** argv) {
    CLI::App app{"HALO retrieval-augmented medical QA pipeline"};
    app.require_subcommand(1);

    AppConfig cfg;       // resolved configuration
    AppConfig flag_cfg;  // values given on the command line
    std::string config_file;
    bool print_config = false;
    app.add_option("--config", config_file, "JSON config file");
    app.add_flag("--print-config", print_config, "print the resolved configuration and exit");
    auto* o_endpoint = app.add_option("--endpoint", flag_cfg.endpoint, "chat provider endpoint URL");
    auto* o_model = app.add_option("--model", flag_cfg.model, "provider model id");
    auto* o_cache = app.add_option("--cache-dir", flag_cfg.cache_dir, "response/embedding cache directory");
    auto* o_offline = app.add_flag("--offline", flag_cfg.offline, "forbid all live network transports");
    auto* o_mock = app.add_option("--mock", flag_cfg.mock_path, "chat mock fixture JSON");
    auto* o_corpus = app.add_option("--corpus", flag_cfg.corpus_path, "local corpus (line-delimited JSON)");
    auto* o_replay = app.add_option("--replay", flag_cfg.replay_path, "PubMed replay fixture JSON");
    auto* o_lambda = app.add_option("--lambda", flag_cfg.lambda, "MMR relevance/diversity trade-off")
                         ->check(CLI::Range(0.0, 1.0));
    auto* o_k = app.add_option("--k", flag_cfg.k, "MMR selection budget");
    auto* o_n = app.add_option("--n", flag_cfg.target_n, "number of query rephrasings");
    auto* o_pqm = app.add_option("--per-query-max", flag_cfg.per_query_max, "documents fetched per query");
    auto* o_dim = app.add_option("--embed-dim", flag_cfg.embed_dim, "test embedder dimension");
    auto* o_tpl = app.add_option("--expansion-template", flag_cfg.expansion_template_path,
                                 "expansion prompt template file ({question}, {count})");
    auto* o_shots = app.add_option("--fewshots", flag_cfg.fewshots_path, "exemplar file (JSON)");

    // expand
    auto* cmd_expand = app.add_subcommand("expand", "generate query rephrasings");
    std::string expand_question;
    cmd_expand->add_option("question", expand_question, "the question to expand")->required();

    // retrieve
    auto* cmd_retrieve = app.add_subcommand("retrieve", "build a candidate pool for a query set");
    std::string retrieve_queries = "-";
    cmd_retrieve->add_option("--queries", retrieve_queries, "ExpandedQuerySet JSON file or -");

    // select
    auto* cmd_select = app.add_subcommand("select", "MMR-select chunks from a pool");
    std::string select_pool = "-";
    std::string select_queries;
    std::string select_emit_chunks;
    std::string select_options_csv;
    cmd_select->add_option("--pool", select_pool, "CandidatePool JSON file or -");
    cmd_select->add_option("--queries", select_queries, "ExpandedQuerySet JSON (defaults to the pool's)");
    cmd_select->add_option("--emit-chunks", select_emit_chunks, "write selected chunks JSON here");
    cmd_select->add_option("--options", select_options_csv, "comma-separated answer options");

    // ask
    auto* cmd_ask = app.add_subcommand("ask", "answer one multiple-choice question");
    std::string ask_question, ask_item_file, ask_mode = "halo", ask_chunks_file;
    std::vector<std::string> ask_options;
    bool show_prompt = false;
    cmd_ask->add_option("--question", ask_question, "question text");
    cmd_ask->add_option("--option", ask_options, "answer option (repeat; labeled A.. in order)");
    cmd_ask->add_option("--item", ask_item_file, "item JSON {question, options, gold?}");
    cmd_ask->add_option("--mode", ask_mode, "baseline or halo");
    cmd_ask->add_option("--chunks", ask_chunks_file, "pre-selected chunks JSON (skips retrieval)");
    cmd_ask->add_flag("--show-prompt", show_prompt, "print the assembled prompt");

    // eval
    auto* cmd_eval = app.add_subcommand("eval", "run the evaluation harness");
    EvalConfig eval_cfg;
    std::string eval_modes = "baseline,halo", eval_split = "dev";
    std::string eval_subjects_csv, eval_keywords_csv, eval_out_dir;
    long eval_sample = 0;
    long eval_seed = -1;
    cmd_eval->add_option("--dataset", eval_cfg.dataset_path, "dataset jsonl")->required();
    cmd_eval->add_option("--split", eval_split, "dev|test|custom");
    cmd_eval->add_option("--modes", eval_modes, "comma-separated: baseline,halo");
    cmd_eval->add_option("--sample", eval_sample, "sample size (requires --seed)");
    cmd_eval->add_option("--seed", eval_seed, "sampling seed");
    cmd_eval->add_option("--subjects", eval_subjects_csv, "comma-separated subject filter");
    cmd_eval->add_option("--keywords", eval_keywords_csv, "comma-separated keyword filter");
    cmd_eval->add_option("--out-dir", eval_out_dir, "directory for report files");
    cmd_eval->add_option("--checkpoint", eval_cfg.checkpoint_path, "checkpoint jsonl path");
    cmd_eval->add_flag("--resume", eval_cfg.resume, "skip items present in the checkpoint");
    cmd_eval->add_option("--parallelism", eval_cfg.parallelism, "concurrent items in flight");

    for (auto* sub : app.get_subcommands(nullptr)) sub->fallthrough();
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    // Precedence: defaults < config file < environment < flags.
    if (!config_file.empty()) apply_json(cfg, json::parse(slurp(config_file)));
    apply_env(cfg);
    if (o_endpoint->count()) cfg.endpoint = flag_cfg.endpoint;
    if (o_model->count()) cfg.model = flag_cfg.model;
    if (o_cache->count()) cfg.cache_dir = flag_cfg.cache_dir;
    if (o_offline->count()) cfg.offline = flag_cfg.offline;
    if (o_mock->count()) cfg.mock_path = flag_cfg.mock_path;
    if (o_corpus->count()) cfg.corpus_path = flag_cfg.corpus_path;
    if (o_replay->count()) cfg.replay_path = flag_cfg.replay_path;
    if (o_lambda->count()) cfg.lambda = flag_cfg.lambda;
    if (o_k->count()) cfg.k = flag_cfg.k;
    if (o_n->count()) cfg.target_n = flag_cfg.target_n;
    if (o_pqm->count()) cfg.per_query_max = flag_cfg.per_query_max;
    if (o_dim->count()) cfg.embed_dim = flag_cfg.embed_dim;
    if (o_tpl->count()) cfg.expansion_template_path = flag_cfg.expansion_template_path;
    if (o_shots->count()) cfg.fewshots_path = flag_cfg.fewshots_path;

    if (print_config) {
        std::cout << cfg.to_json().dump(2) << "\n";
        return kExitOk;
    }

    try {
        if (*cmd_expand) {
            if (trim(expand_question).empty()) {
                std::cerr << "error: question must be non-empty\n";
                return kExitUsage;
            }
            if (cfg.target_n < 1) {
                std::cerr << "error: --n must be >= 1\n";
                return kExitUsage;
            }
            PipelineContext ctx = make_context(cfg);
            Query q{expand_question, "q0"};
            auto qs = expand(q, cfg.target_n, *ctx.gateway, ctx.config.expansion);
            std::cout << query_set_to_json(qs) << "\n";
            return kExitOk;
        }

        if (*cmd_retrieve) {
            PipelineContext ctx = make_context(cfg);
            Sources sources = make_sources(cfg, ctx);
            auto qs = query_set_from_json(slurp(retrieve_queries));
            auto pool = build_pool(qs, cfg.per_query_max, ctx.sources);
            std::cout << pool_to_json(pool) << "\n";
            return kExitOk;
        }

        if (*cmd_select) {
            PipelineContext ctx = make_context(cfg);
            CandidatePool pool = pool_from_json(slurp(select_pool));
            ExpandedQuerySet qs = select_queries.empty()
                                      ? pool.query_set
                                      : query_set_from_json(slurp(select_queries));
            std::vector<Chunk> chunks;
            for (const auto& doc : pool.documents) {
                auto dc = chunk_document(doc, ctx.config.max_chunk_chars,
                                         ctx.config.overlap_chars);
                chunks.insert(chunks.end(), dc.begin(), dc.end());
            }
            std::vector<std::string> options;
            if (!select_options_csv.empty())
                for (auto& s : split(select_options_csv, ',')) options.push_back(trim(s));
            auto matrix = build_matrix(chunks, qs, options, *ctx.embeddings, ctx.config.mmr);
            auto state = select(matrix, ctx.config.mmr);
            std::cout << selection_to_json(state) << "\n";
            if (!select_emit_chunks.empty()) {
                std::vector<Chunk> picked;
                for (const auto& pick : state.picks)
                    for (const auto& c : chunks)
                        if (c.parent_doc_id + "#" + std::to_string(c.ordinal) == pick.chunk_id)
                            picked.push_back(c);
                std::ofstream out(select_emit_chunks, std::ios::trunc);
                out << chunks_to_json(picked) << "\n";
            }
            return kExitOk;
        }

        if (*cmd_ask) {
            McqItem item = item_from_flags(ask_question, ask_options, ask_item_file);
            if (trim(item.question).empty() || item.options.size() < 2) {
                std::cerr << "error: ask needs a question and at least two options\n";
                return kExitUsage;
            }
            PromptMode mode = mode_from_name(ask_mode);
            PipelineContext ctx = make_context(cfg);
            Sources sources = make_sources(cfg, ctx);

            if (!ask_chunks_file.empty()) {
                // Pre-selected chunks: assemble + complete + parse only.
                auto chunks = chunks_from_json(slurp(ask_chunks_file));
                PromptBundle bundle = assemble(item, chunks, mode);
                ChatRequest req;
                req.system_text = bundle.system_text;
                req.user_text = bundle.user_text;
                req.temperature = ctx.config.answer_temperature;
                req.max_output_tokens = ctx.config.answer_max_tokens;
                req.model_id = ctx.config.answer_model_id;
                auto resp = ctx.gateway->complete(req);
                auto parsed = parse_answer(resp.text, item.options);
                json out = {{"answer", parsed.choice ? std::string(1, *parsed.choice) : ""},
                            {"parse_rule", parsed.parse_rule == ParseRule::failed ? "failed" : "ok"},
                            {"raw", parsed.raw}};
                if (show_prompt) out["prompt"] = bundle.user_text;
                std::cout << out.dump(2) << "\n";
                return parsed.choice ? kExitOk : kExitRuntime;
            }

            AskResult result = answer_item(item, mode, ctx);
            json out = {{"answer", result.parsed.choice ? std::string(1, *result.parsed.choice) : ""},
                        {"parse_rule",
                         result.parsed.parse_rule == ParseRule::failed ? "failed" : "ok"},
                        {"raw", result.parsed.raw},
                        {"selection", json::parse(selection_to_json(result.selection))},
                        {"warnings", result.warnings}};
            if (show_prompt) out["prompt"] = result.bundle.user_text;
            std::cout << out.dump(2) << "\n";
            return kExitOk;
        }

        if (*cmd_eval) {
            eval_cfg.split = eval_split == "test" ? Split::test
                             : eval_split == "custom" ? Split::custom
                                                      : Split::dev;
            eval_cfg.modes.clear();
            for (auto& m : split(eval_modes, ','))
                if (!trim(m).empty()) eval_cfg.modes.push_back(mode_from_name(trim(m)));
            if (eval_sample > 0) {
                if (eval_seed < 0) {
                    std::cerr << "error: --sample requires --seed\n";
                    return kExitUsage;
                }
                eval_cfg.sample = SampleSpec{static_cast<size_t>(eval_sample),
                                             static_cast<uint64_t>(eval_seed)};
            }
            for (auto& s : split(eval_subjects_csv, ','))
                if (!trim(s).empty()) eval_cfg.subjects.push_back(trim(s));
            for (auto& s : split(eval_keywords_csv, ','))
                if (!trim(s).empty()) eval_cfg.keywords.push_back(trim(s));

            PipelineContext ctx = make_context(cfg);
            ctx.config.expansion.target_n = cfg.target_n;
            Sources sources = make_sources(cfg, ctx);

            EvalReport report = run_eval(eval_cfg, ctx);
            std::cout << report_to_markdown(report, cfg.model);
            int warn_count = 0;
            for (const auto& r : report.items)
                if (!r.error.empty()) ++warn_count;
            if (warn_count)
                std::cerr << warn_count << " item(s) recorded errors (scored incorrect)\n";

            if (!eval_out_dir.empty()) {
                std::filesystem::create_directories(eval_out_dir);
                emit_report(report, ReportFormat::json, eval_out_dir + "/report.json", cfg.model);
                emit_report(report, ReportFormat::csv, eval_out_dir + "/report.csv", cfg.model);
                emit_report(report, ReportFormat::markdown, eval_out_dir + "/report.md",
                            cfg.model);
            }
            return kExitOk;
        }
    } catch (const AuthError& e) {
        std::cerr << "auth error: " << e.what() << "\n";
        return kExitProvider;
    } catch (const RateLimitExhausted& e) {
        std::cerr << "rate limit error: " << e.what() << "\n";
        return kExitProvider;
    } catch (const ProviderError& e) {
        std::cerr << "provider error: " << e.what() << "\n";
        return kExitProvider;
    } catch (const EmptyDataset& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
