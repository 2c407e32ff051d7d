#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "halo/pipeline.hpp"
#include "halo/prompt.hpp"

namespace halo {

enum class Split { dev, test, custom };

struct SampleSpec {
    size_t size = 0;
    uint64_t seed = 0;
};

struct EvalConfig {
    std::string dataset_path;
    Split split = Split::dev;
    std::vector<PromptMode> modes = {PromptMode::baseline, PromptMode::halo};
    std::optional<SampleSpec> sample;
    std::vector<std::string> subjects;
    std::vector<std::string> keywords;
    int parallelism = 4;
    std::string checkpoint_path;  // empty = no checkpointing
    bool resume = false;
};

struct ItemResult {
    std::string item_id;
    PromptMode mode = PromptMode::baseline;
    ParsedAnswer parsed;
    bool correct = false;
    std::string error;  // per-item failure tag; scored as incorrect
    long expand_ms = 0;
    long retrieve_ms = 0;
    long select_ms = 0;
    long answer_ms = 0;
};

struct SubjectRow {
    std::string subject;
    int n_items = 0;
    int n_correct = 0;

    double accuracy() const { return n_items ? double(n_correct) / n_items : 0.0; }
};

struct ModeStats {
    int item_count = 0;
    int correct_count = 0;
    int parse_failures = 0;
    std::vector<SubjectRow> subjects;  // sorted by subject name

    double accuracy() const { return item_count ? double(correct_count) / item_count : 0.0; }
};

struct EvalReport {
    std::string schema = "halo-report/1";
    std::string config_echo;  // JSON text of the resolved configuration
    std::map<std::string, ModeStats> per_mode;  // "baseline" / "halo"
    std::vector<ItemResult> items;
    std::string started_at;
    std::string finished_at;
};

struct LoadResult {
    std::vector<McqItem> items;
    std::vector<std::string> warnings;
};

// MedMCQA line-delimited JSON: {id, question, opa..opd, cop, subject_name,
// topic_name}; cop 0-3 -> A-D. split=custom additionally accepts "ope"
// with cop up to 4.
LoadResult load_dataset(const std::string& path, Split split);

std::vector<McqItem> filter_items(const std::vector<McqItem>& items,
                                  const std::vector<std::string>& subjects,
                                  const std::vector<std::string>& keywords);

// Seeded Fisher-Yates shuffle, then prefix of sample.size.
std::vector<McqItem> sample_items(std::vector<McqItem> items, const SampleSpec& spec);

std::vector<SubjectRow> aggregate_by_subject(const std::vector<ItemResult>& results,
                                             const std::vector<McqItem>& items);

EvalReport run_eval(const EvalConfig& cfg, PipelineContext& ctx);

std::string mode_name(PromptMode mode);
PromptMode mode_from_name(const std::string& name);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
std::string report_to_csv(const EvalReport& report);
std::string report_to_markdown(const EvalReport& report, const std::string& model_label);

enum class ReportFormat { json, csv, markdown };
void emit_report(const EvalReport& report, ReportFormat format, const std::string& path,
                 const std::string& model_label = "model");

}  // namespace halo
