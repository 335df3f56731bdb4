#pragma once

// Offline bank of implicit questions extracted from source chunks. Template
// "What is {X}?" questions are derived from the primary question.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "coi/clauses.hpp"
#include "coi/corpus.hpp"
#include "coi/generator.hpp"
#include "coi/json_lines.hpp"
#include "coi/question.hpp"
#include "coi/templates.hpp"
#include "coi/vector_index.hpp"

namespace coi {

struct ImplicitQuestion {
    std::string id;
    std::string question;  // ends in '?'
    std::string answer;
    std::string source_chunk_id;
    std::string tag;

    friend bool operator==(const ImplicitQuestion&, const ImplicitQuestion&) = default;
};

inline void to_json(nlohmann::json& j, const ImplicitQuestion& q) {
    j = nlohmann::json{{"id", q.id},
                       {"question", q.question},
                       {"answer", q.answer},
                       {"source_chunk_id", q.source_chunk_id},
                       {"tag", q.tag}};
}

inline void from_json(const nlohmann::json& j, ImplicitQuestion& q) {
    j.at("id").get_to(q.id);
    j.at("question").get_to(q.question);
    j.at("answer").get_to(q.answer);
    j.at("source_chunk_id").get_to(q.source_chunk_id);
    j.at("tag").get_to(q.tag);
}

struct QuestionBank {
    std::vector<ImplicitQuestion> questions;
    VectorIndex index;  // keyed by question id

    bool empty() const noexcept { return questions.empty(); }

    /// Writes `<stem>.jsonl` (questions) and `<stem>.index.jsonl` (vectors).
    void save(const std::string& stem) const {
        write_json_lines(stem + ".jsonl", questions);
        index.save(stem + ".index.jsonl");
    }

    static QuestionBank load(const std::string& stem) {
        QuestionBank bank;
        bank.questions = read_json_lines<ImplicitQuestion>(stem + ".jsonl");
        bank.index = VectorIndex::load(stem + ".index.jsonl");
        if (bank.index.size() != bank.questions.size()) {
            throw ParseError("bank index has " + std::to_string(bank.index.size()) +
                             " entries for " + std::to_string(bank.questions.size()) +
                             " questions");
        }
        for (const auto& q : bank.questions) {
            if (!bank.index.find(q.id)) throw ParseError("bank index lacks question " + q.id);
        }
        return bank;
    }
};

struct QaParse {
    std::vector<std::pair<std::string, std::string>> pairs;
    std::size_t skipped = 0;  // "-" lines that could not be split into Q and A
};

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

/// Parses lines of the form "- question? answer". The question keeps its "?".
inline QaParse parse_qa_lines(std::string_view response) {
    QaParse out;
    std::size_t pos = 0;
    while (pos <= response.size()) {
        auto nl = response.find('\n', pos);
        auto line = trim(response.substr(pos, nl == std::string_view::npos ? nl : nl - pos));
        if (!line.empty() && line.front() == '-') {
            auto body = trim(std::string_view(line).substr(1));
            auto q = body.find('?');
            if (q == std::string::npos || trim(std::string_view(body).substr(0, q)).empty()) {
                ++out.skipped;
            } else {
                out.pairs.emplace_back(trim(std::string_view(body).substr(0, q + 1)),
                                       trim(std::string_view(body).substr(q + 1)));
            }
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return out;
}

inline std::string qa_extraction_prompt(std::string_view paragraph) {
    return templates::fill(templates::qa_extraction, {{"sentence", paragraph}});
}

inline QaParse extract_qas(std::string_view paragraph, GeneratorProvider& generator,
                           const std::string& model_id, Decoding decoding = {}) {
    if (trim(paragraph).empty()) throw InvalidArgument("extract_qas needs a non-empty paragraph");
    ChatRequest req{model_id, qa_extraction_prompt(paragraph), decoding};
    return parse_qa_lines(generator.complete(req).text);
}

struct BankBuildOptions {
    std::string tag;
    std::string model_id;
    Decoding decoding;
    /// When set, per-chunk extraction results are appended here and reused on restart.
    std::string checkpoint_path;
};

struct BankBuildStats {
    std::size_t chunks = 0;
    std::size_t resumed = 0;
    std::size_t skipped_lines = 0;
};

/// Runs Q&A extraction over each chunk and embeds every question into the bank index.
/// Ids are `<tag>-q<n>`.
inline QuestionBank build_bank(const std::vector<Chunk>& chunks, GeneratorProvider& generator,
                               EmbeddingProvider& embedder, const BankBuildOptions& opts,
                               BankBuildStats* stats = nullptr) {
    std::map<std::string, QaParse> done;
    if (!opts.checkpoint_path.empty() && std::filesystem::exists(opts.checkpoint_path)) {
        for_each_json_line(opts.checkpoint_path, [&](const nlohmann::json& j, std::size_t) {
            QaParse p;
            p.pairs = j.at("pairs").get<std::vector<std::pair<std::string, std::string>>>();
            p.skipped = j.at("skipped").get<std::size_t>();
            done[j.at("chunk_id").get<std::string>()] = std::move(p);
        });
    }
    std::ofstream checkpoint;
    if (!opts.checkpoint_path.empty()) {
        checkpoint.open(opts.checkpoint_path, std::ios::app);
        if (!checkpoint) throw Error("cannot open checkpoint " + opts.checkpoint_path);
    }

    QuestionBank bank;
    BankBuildStats st;
    for (const auto& c : chunks) {
        ++st.chunks;
        QaParse parsed;
        if (auto it = done.find(c.id); it != done.end()) {
            parsed = it->second;
            ++st.resumed;
        } else {
            parsed = extract_qas(c.text, generator, opts.model_id, opts.decoding);
            if (checkpoint.is_open()) {
                checkpoint << nlohmann::json{{"chunk_id", c.id},
                                             {"pairs", parsed.pairs},
                                             {"skipped", parsed.skipped}}
                                  .dump()
                           << '\n'
                           << std::flush;
            }
        }
        st.skipped_lines += parsed.skipped;
        for (auto& [q, a] : parsed.pairs) {
            ImplicitQuestion iq;
            iq.id = (opts.tag.empty() ? std::string("q") : opts.tag + "-q") +
                    std::to_string(bank.questions.size());
            iq.question = std::move(q);
            iq.answer = std::move(a);
            iq.source_chunk_id = c.id;
            iq.tag = opts.tag;
            bank.questions.push_back(std::move(iq));
        }
    }
    if (!bank.questions.empty()) {
        std::vector<std::string> texts;
        texts.reserve(bank.questions.size());
        for (const auto& q : bank.questions) texts.push_back(q.question);
        auto vectors = embedder.embed(texts);
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            bank.index.add(bank.questions[i].id, std::move(vectors[i]),
                           {{"question", bank.questions[i].question}});
        }
    }
    if (stats) *stats = st;
    return bank;
}

namespace detail {

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Pronouns and question words make meaningless definition targets.
inline bool is_function_label(const std::string& label) {
    auto w = lower(label);
    return in_list(w, {"i",    "you",   "he",    "she",   "it",   "we",    "they",  "me",
                       "him",  "her",   "us",    "them",  "this", "that",  "these", "those",
                       "what", "who",   "why",   "how",   "when", "where", "which", "whose",
                       "there", "here", "one",   "someone", "something", "anyone", "anything"});
}

// Leading noun phrase of a clause label: cut at the first preposition, conjunction or
// relative word, so "a String to an int in Java" becomes "a String".
inline std::string head_phrase(const std::string& label) {
    auto toks = tokenize(label);
    std::size_t end = 0;
    for (; end < toks.size(); ++end) {
        auto w = lower(toks[end]);
        if (end > 0 && in_list(w, {"to", "in", "into", "of", "for", "with", "on", "at", "by",
                                   "from", "as", "about", "and", "or", "but", "that", "which",
                                   "when", "where", "while", "because", "if", "than", "how"}))
            break;
    }
    return trim_label(join(toks, " ", 0, end));
}

}  // namespace detail

/// "What is {X}?" for every distinct subject and object label in the question text,
/// in order of first appearance, deduplicated case-insensitively. Labels are cut to
/// their leading noun phrase.
inline std::vector<std::string> template_questions(const QuestionRecord& primary,
                                                   const ClauseExtractor& extractor) {
    if (trim(primary.title).empty() && trim(primary.body).empty()) {
        throw InvalidArgument("template_questions needs a title or body");
    }
    std::vector<std::string> out;
    std::set<std::string> seen;
    auto consider = [&](const std::string& raw) {
        auto label = detail::head_phrase(raw);
        if (label.empty() || detail::is_function_label(label)) return;
        if (detail::is_wh_word(detail::lower(tokenize(label).front()))) return;
        if (!seen.insert(detail::lower(label)).second) return;
        out.push_back("What is " + label + "?");
    };
    for (const auto& c : extractor.extract(primary.query_text())) {
        consider(c.subject);
        consider(c.object);
    }
    return out;
}

}  // namespace coi
