#pragma once

// Prompt assembly for the answer modes and answer generation.

#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coi/coi_planner.hpp"
#include "coi/corpus.hpp"
#include "coi/error.hpp"
#include "coi/generator.hpp"
#include "coi/question.hpp"
#include "coi/templates.hpp"

namespace coi {

struct PromptBundle {
    Mode mode = Mode::genai;
    std::string text;
    Decoding decoding;
    std::vector<std::string> retrieved_chunk_ids;
    std::optional<IllocutionPlan> plan;
};

/// "Page {first}-{last}:\n{text}" per chunk, blocks separated by a blank line.
inline std::string render_chunks(const std::vector<Chunk>& chunks) {
    std::string out;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        if (i) out += "\n\n";
        out += "Page " + std::to_string(chunks[i].page_span.first) + "-" +
               std::to_string(chunks[i].page_span.last) + ":\n" + chunks[i].text;
    }
    return out;
}

inline PromptBundle assemble_genai(const QuestionRecord& q) {
    PromptBundle b;
    b.mode = Mode::genai;
    b.text = templates::fill(templates::genai, {{"topic", q.title}, {"body", q.body}});
    return b;
}

inline PromptBundle assemble_rag(const QuestionRecord& q, const std::string& textbook_title,
                                 const std::vector<Chunk>& chunks) {
    if (chunks.empty()) {
        throw InvalidArgument("assemble_rag needs at least one chunk; use genai mode instead");
    }
    PromptBundle b;
    b.mode = Mode::rag;
    auto contents = render_chunks(chunks);
    b.text = templates::fill(templates::rag, {{"textbook", textbook_title},
                                              {"topic", q.title},
                                              {"body", q.body},
                                              {"contents", contents}});
    for (const auto& c : chunks) b.retrieved_chunk_ids.push_back(c.id);
    return b;
}

/// The RAG prompt followed by one "Implicit question {i}: ..." block per planned
/// question, in plan order. An empty plan reproduces the RAG prompt exactly.
inline PromptBundle assemble_rag_coi(const QuestionRecord& q, const std::string& textbook_title,
                                     const std::vector<Chunk>& primary_chunks,
                                     const IllocutionPlan& plan) {
    if (primary_chunks.empty() && plan.empty()) {
        throw InvalidArgument("assemble_rag_coi needs primary chunks or a non-empty plan");
    }
    PromptBundle b;
    b.mode = Mode::rag_coi;
    b.text = templates::fill(templates::rag, {{"textbook", textbook_title},
                                              {"topic", q.title},
                                              {"body", q.body},
                                              {"contents", render_chunks(primary_chunks)}});
    for (const auto& c : primary_chunks) b.retrieved_chunk_ids.push_back(c.id);
    for (std::size_t i = 0; i < plan.selected.size(); ++i) {
        const auto& sq = plan.selected[i];
        std::vector<Chunk> chunks;
        for (const auto& sc : sq.chunks) {
            chunks.push_back(sc.chunk);
            b.retrieved_chunk_ids.push_back(sc.chunk.id);
        }
        b.text += "\n\nImplicit question " + std::to_string(i + 1) + ": " + sq.question.text +
                  "\nContext:\n" + render_chunks(chunks);
    }
    b.plan = plan;
    return b;
}

struct Explanation {
    std::string question_id;
    Mode mode = Mode::genai;
    std::string model_id;
    std::string text;
    Decoding decoding;
    std::string created_at;
};

inline void to_json(nlohmann::json& j, const Explanation& e) {
    j = nlohmann::json{{"question_id", e.question_id},
                       {"mode", to_string(e.mode)},
                       {"model_id", e.model_id},
                       {"text", e.text},
                       {"temperature", e.decoding.temperature},
                       {"top_p", e.decoding.top_p},
                       {"created_at", e.created_at}};
}

inline void from_json(const nlohmann::json& j, Explanation& e) {
    j.at("question_id").get_to(e.question_id);
    e.mode = mode_from_string(j.at("mode").get<std::string>());
    j.at("model_id").get_to(e.model_id);
    j.at("text").get_to(e.text);
    e.decoding = {j.at("temperature").get<double>(), j.at("top_p").get<double>()};
    e.created_at = j.value("created_at", "");
}

/// Sends the bundle as one user message with the bundle's decoding parameters.
inline Explanation generate(const PromptBundle& bundle, GeneratorProvider& provider,
                            const std::string& model_id, const std::string& question_id) {
    if (bundle.text.empty()) throw InvalidArgument("cannot generate from an empty prompt");
    auto completion = provider.complete({model_id, bundle.text, bundle.decoding});
    if (completion.text.find_first_not_of(" \t\r\n\f\v") == std::string::npos) {
        throw ProviderError("empty completion from " + model_id, 1);
    }
    return {question_id, bundle.mode, model_id, std::move(completion.text), bundle.decoding,
            std::move(completion.created_at)};
}

namespace detail {

inline std::string regex_escape(const std::string& s) {
    static const std::regex special(R"([.^$|()\[\]{}*+?\\])");
    return std::regex_replace(s, special, R"(\$&)");
}

}  // namespace detail

/// Removes square-bracketed spans and parenthesized source annotations (those mentioning
/// "page", "p.", "pp." or the textbook title). Whitespace preceding a removed span goes
/// with it, so no double spaces are left behind. Applied to a fixpoint, so nested
/// brackets are removed completely.
inline std::string strip_citations(std::string text, const std::string& textbook_title = {}) {
    static const std::regex bracketed(R"([ \t]*\[[^\[\]\n]*\])");
    static const std::regex paren(R"([ \t]*\(([^()\n]*)\))");
    static const std::regex keyword(R"((\bpages?\b)|(\bpp?\.))", std::regex::icase);
    std::regex title_re;
    bool use_title = !textbook_title.empty();
    if (use_title) title_re = std::regex(detail::regex_escape(textbook_title), std::regex::icase);

    for (;;) {
        std::string next = std::regex_replace(text, bracketed, "");
        std::string rebuilt;
        auto begin = std::sregex_iterator(next.begin(), next.end(), paren);
        std::size_t last = 0;
        for (auto it = begin; it != std::sregex_iterator(); ++it) {
            const auto& m = *it;
            std::string inner = m[1].str();
            bool annotation = std::regex_search(inner, keyword) ||
                              (use_title && std::regex_search(inner, title_re));
            rebuilt.append(next, last, static_cast<std::size_t>(m.position()) - last);
            if (!annotation) rebuilt.append(m.str());
            last = static_cast<std::size_t>(m.position() + m.length());
        }
        rebuilt.append(next, last);
        if (rebuilt == text) return rebuilt;
        text = std::move(rebuilt);
    }
}

}  // namespace coi
