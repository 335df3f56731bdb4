#pragma once

// Prompt templates. Placeholders are written as {name}.

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coi/error.hpp"

namespace coi::templates {

inline constexpr std::string_view genai =
    "Provide a detailed, concise, pertinent, and coherent explanatory answer to the question "
    "below. Provide examples if needed.\n"
    "\n"
    "Question:\n"
    "#{topic}\n"
    "{body}";

inline constexpr std::string_view rag =
    "Sift through the text chunks provided (extracted from the textbook \"{textbook}\") and "
    "combine the most relevant ones into a detailed, concise, pertinent, and coherent "
    "explanatory answer to the question below. Every statement must contain a reference to "
    "the source textbook page(s). Provide examples if needed.\n"
    "\n"
    "Question:\n"
    "#{topic}\n"
    "{body}\n"
    "\n"
    "Text chunks:\n"
    "{contents}";

inline constexpr std::string_view qa_extraction =
    "Analyse the English paragraph below to generate a comprehensive list of Q&As in English, "
    "capturing: what, who, why, how, how much, where, when, who by, which, whose. Answers must "
    "succinctly reflect the paragraph's content without repeating the question's wording. Q&As "
    "must use precise and direct language, avoiding vague terms and generalizations, clearly "
    "specifying the context and subjects involved without assuming prior knowledge.\n"
    "\n"
    "Example Paragraph: Alice, an experienced hiker, explores the Rocky Mountains despite rain. "
    "She packs her gear early in the morning.\n"
    "\n"
    "Expected Output:\n"
    "- Who is Alice? An experienced hiker.\n"
    "- What did Alice do? Explored the Rocky Mountains.\n"
    "- Despite what did Alice decide to explore the Rocky Mountains? Rain.\n"
    "- What did she pack? Gear.\n"
    "- When did she pack? Early in the morning.\n"
    "\n"
    "Paragraph for Analysis:\n"
    "{sentence}";

/// Marker preceding the paragraph in the extraction prompt.
inline constexpr std::string_view qa_paragraph_marker = "Paragraph for Analysis:\n";

/// Single-pass substitution: replacement values are never rescanned for placeholders.
inline std::string fill(std::string_view tmpl,
                        const std::vector<std::pair<std::string_view, std::string_view>>& vars) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            auto close = tmpl.find('}', i);
            if (close != std::string_view::npos) {
                auto name = tmpl.substr(i + 1, close - i - 1);
                bool matched = false;
                for (const auto& [k, v] : vars) {
                    if (k == name) {
                        out.append(v);
                        matched = true;
                        break;
                    }
                }
                if (matched) {
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(tmpl[i++]);
    }
    return out;
}

}  // namespace coi::templates
