#pragma once

#include <optional>
#include <string>
#include <vector>

#include "halo/retrieval.hpp"

namespace halo {

struct McqOption {
    char label = 'A';
    std::string text;
};

struct McqItem {
    std::string item_id;
    std::string question;
    std::vector<McqOption> options;  // 2..5, labels consecutive from A
    char gold = 'A';
    std::string subject;
    std::string topic;

    bool has_label(char label) const;
};

enum class PromptMode { baseline, halo };

struct PromptBundle {
    std::string system_text;
    std::string user_text;
    std::vector<std::string> context_chunks;  // chunk ids, halo mode only
    PromptMode mode = PromptMode::baseline;
};

enum class ParseRule { exact_letter, answer_phrase, option_text_match, failed };

struct ParsedAnswer {
    std::optional<char> choice;
    std::string raw;
    ParseRule parse_rule = ParseRule::failed;
};

struct Exemplar {
    std::string question;
    std::vector<McqOption> options;
    std::string reasoning;
    char answer = 'A';
};

// Few-shot exemplars + the step-by-step reasoning scaffold + selected
// context + question and options, ready for a chat provider.
PromptBundle assemble(const McqItem& item, const std::vector<Chunk>& selected_chunks,
                      PromptMode mode, const std::vector<Exemplar>& exemplars = {});

// Extract an option choice from model output. Cascade, first match wins:
// exact letter, then the last "Answer: X"-style phrase, then a unique
// option-text match on the final line. Total function; failure is a value.
ParsedAnswer parse_answer(const std::string& raw, const std::vector<McqOption>& options);

// Two built-in exemplars (one 4-option, one 5-option), both fictional.
std::vector<Exemplar> builtin_fewshots();

// JSON list of {question, options:[{label,text}], reasoning, answer}.
std::vector<Exemplar> load_fewshots(const std::string& path);

}  // namespace halo
