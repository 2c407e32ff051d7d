#include "halo/prompt.hpp"

#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "halo/errors.hpp"
#include "halo/text_util.hpp"

namespace halo {

using nlohmann::json;

bool McqItem::has_label(char label) const {
    for (const auto& opt : options)
        if (opt.label == label) return true;
    return false;
}

namespace {

std::string render_options(const std::vector<McqOption>& options) {
    std::string out;
    for (const auto& opt : options) {
        out += opt.label;
        out += ". " + opt.text + "\n";
    }
    return out;
}

std::string render_exemplar(const Exemplar& ex) {
    std::string out = "Question: " + ex.question + "\nOptions:\n" + render_options(ex.options);
    out += "Reasoning: " + ex.reasoning + "\nAnswer: ";
    out += ex.answer;
    out += "\n";
    return out;
}

std::string source_tag(const std::string& doc_id) {
    if (doc_id.rfind("pmid:", 0) == 0) return "[Source: PMID " + doc_id.substr(5) + "]";
    return "[Source: " + doc_id + "]";
}

constexpr const char* kCotSteps =
    "Answer the question by reasoning step by step:\n"
    "1. Identify the main subject or keyword in the question.\n"
    "2. Understand the relationship between the subject and the question asked.\n"
    "3. Extract relevant information from the context.\n"
    "4. Analyze each option.\n"
    "5. Provide the answer.\n";

}  // namespace

PromptBundle assemble(const McqItem& item, const std::vector<Chunk>& selected_chunks,
                      PromptMode mode, const std::vector<Exemplar>& exemplars) {
    if (item.options.size() < 2 || item.options.size() > 5)
        throw OptionCountOutOfRange("item " + item.item_id + " has " +
                                    std::to_string(item.options.size()) + " options");

    const std::vector<Exemplar>& shots = exemplars.empty() ? builtin_fewshots() : exemplars;

    std::string user;
    user += "Here are examples of the expected answer format:\n\n";
    for (const auto& ex : shots) user += render_exemplar(ex) + "\n";

    user += kCotSteps;
    user += "\n";

    PromptBundle bundle;
    bundle.mode = mode;
    if (mode == PromptMode::halo) {
        user += "CONTEXT:\n";
        int n = 1;
        for (const auto& chunk : selected_chunks) {
            user += "[" + std::to_string(n++) + "] " + source_tag(chunk.parent_doc_id) + " " +
                    chunk.text + "\n";
            bundle.context_chunks.push_back(chunk.parent_doc_id + "#" +
                                            std::to_string(chunk.ordinal));
        }
        user += "\n";
    }

    user += "QUESTION: " + item.question + "\nOPTIONS:\n" + render_options(item.options);
    user += "\nEnd your response with a line of the form \"Answer: <LETTER>\".\n";

    bundle.system_text =
        "You are a careful medical expert answering multiple-choice exam questions.";
    bundle.user_text = user;
    return bundle;
}

ParsedAnswer parse_answer(const std::string& raw, const std::vector<McqOption>& options) {
    ParsedAnswer out;
    out.raw = raw;

    auto valid = [&](char c) {
        char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        for (const auto& opt : options)
            if (opt.label == upper) return true;
        return false;
    };

    // Rule 1: the whole response is a single option letter.
    std::string stripped = trim(raw);
    if (stripped.size() == 1 && valid(stripped[0])) {
        out.choice = static_cast<char>(std::toupper(static_cast<unsigned char>(stripped[0])));
        out.parse_rule = ParseRule::exact_letter;
        return out;
    }

    // Rule 2: last "Answer: X" style phrase with a valid label. CoT
    // outputs reason first and conclude last.
    static const std::regex phrase(
        R"rx(answer\s*(?:is)?\s*[:\-]?\s*[\("'`]*([A-Ea-e])[\)"'`.]?)rx",
        std::regex::icase);
    std::optional<char> last_valid;
    for (auto it = std::sregex_iterator(raw.begin(), raw.end(), phrase);
         it != std::sregex_iterator(); ++it) {
        char c = static_cast<char>(std::toupper(static_cast<unsigned char>((*it)[1].str()[0])));
        if (valid(c)) last_valid = c;
    }
    if (last_valid) {
        out.choice = *last_valid;
        out.parse_rule = ParseRule::answer_phrase;
        return out;
    }

    // Rule 3: exactly one option's full text appears in the final line.
    auto lines = split_lines(raw);
    std::string final_line;
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        if (!trim(*it).empty()) {
            final_line = *it;
            break;
        }
    }
    if (!final_line.empty()) {
        std::optional<char> match;
        int hits = 0;
        for (const auto& opt : options) {
            if (!trim(opt.text).empty() && contains_casefold(final_line, opt.text)) {
                ++hits;
                match = opt.label;
            }
        }
        if (hits == 1) {
            out.choice = match;
            out.parse_rule = ParseRule::option_text_match;
            return out;
        }
    }

    out.parse_rule = ParseRule::failed;
    return out;
}

std::vector<Exemplar> builtin_fewshots() {
    // Fictional items, deliberately not drawn from any exam dataset.
    std::vector<Exemplar> shots(2);

    shots[0].question =
        "A patient on a newly started medication develops a dry cough. Which drug class is the "
        "most likely cause?";
    shots[0].options = {{'A', "Beta blockers"},
                        {'B', "ACE inhibitors"},
                        {'C', "Calcium channel blockers"},
                        {'D', "Thiazide diuretics"}};
    shots[0].reasoning =
        "The key finding is a dry cough after starting a drug. ACE inhibitors raise bradykinin "
        "levels, which classically causes a persistent dry cough; the other classes do not.";
    shots[0].answer = 'B';

    shots[1].question =
        "Which vitamin deficiency presents with night blindness and conjunctival dryness?";
    shots[1].options = {{'A', "Vitamin A"},
                        {'B', "Vitamin B12"},
                        {'C', "Vitamin C"},
                        {'D', "Vitamin D"},
                        {'E', "Vitamin K"}};
    shots[1].reasoning =
        "Night blindness points to impaired rhodopsin regeneration and ocular surface changes, "
        "both hallmarks of vitamin A deficiency. B12, C, D, and K deficiencies present "
        "differently.";
    shots[1].answer = 'A';

    return shots;
}

std::vector<Exemplar> load_fewshots(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open exemplar file " + path);

    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw MalformedExemplarFile(std::string("exemplar file is not valid JSON: ") + e.what());
    }

    std::vector<Exemplar> shots;
    int idx = 0;
    for (const auto& entry : doc) {
        Exemplar ex;
        try {
            ex.question = entry.at("question").get<std::string>();
            for (const auto& opt : entry.at("options")) {
                McqOption o;
                o.label = opt.at("label").get<std::string>().at(0);
                o.text = opt.at("text").get<std::string>();
                ex.options.push_back(std::move(o));
            }
            ex.reasoning = entry.value("reasoning", "");
            std::string ans = entry.at("answer").get<std::string>();
            if (ans.size() != 1)
                throw MalformedExemplarFile("exemplar " + std::to_string(idx) +
                                            ": answer must be a single letter");
            ex.answer = ans[0];
        } catch (const json::exception& e) {
            throw MalformedExemplarFile("exemplar " + std::to_string(idx) + ": " + e.what());
        }
        bool label_ok = false;
        for (const auto& o : ex.options)
            if (o.label == ex.answer) label_ok = true;
        if (!label_ok)
            throw MalformedExemplarFile("exemplar " + std::to_string(idx) +
                                        ": answer label not among options");
        shots.push_back(std::move(ex));
        ++idx;
    }
    if (shots.empty()) throw MalformedExemplarFile("exemplar file contains no exemplars");
    return shots;
}

}  // namespace halo
