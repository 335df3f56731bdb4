#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "coi/error.hpp"

namespace coi {

/// A user question with its community-accepted answer.
struct QuestionRecord {
    std::string id;
    std::string tag;
    std::string title;
    std::string body;
    std::string accepted_answer;
    long long views = 0;

    /// Retrieval query text: title and body joined by a newline.
    std::string query_text() const { return body.empty() ? title : title + "\n" + body; }

    friend bool operator==(const QuestionRecord&, const QuestionRecord&) = default;
};

inline void to_json(nlohmann::json& j, const QuestionRecord& q) {
    j = nlohmann::json{{"id", q.id},       {"tag", q.tag},
                       {"title", q.title}, {"body", q.body},
                       {"accepted_answer", q.accepted_answer}, {"views", q.views}};
}

inline void from_json(const nlohmann::json& j, QuestionRecord& q) {
    for (const char* field : {"id", "tag", "title", "body", "accepted_answer", "views"}) {
        if (!j.contains(field)) throw ParseError(std::string("missing field '") + field + "'");
    }
    j.at("id").get_to(q.id);
    j.at("tag").get_to(q.tag);
    j.at("title").get_to(q.title);
    j.at("body").get_to(q.body);
    j.at("accepted_answer").get_to(q.accepted_answer);
    j.at("views").get_to(q.views);
}

enum class Mode { genai, rag, rag_coi };

inline std::string to_string(Mode m) {
    switch (m) {
        case Mode::genai: return "genai";
        case Mode::rag: return "rag";
        case Mode::rag_coi: return "rag_coi";
    }
    return "?";
}

inline Mode mode_from_string(const std::string& s) {
    if (s == "genai") return Mode::genai;
    if (s == "rag") return Mode::rag;
    if (s == "rag_coi" || s == "rag+coi") return Mode::rag_coi;
    throw InvalidArgument("unknown mode: " + s);
}

}  // namespace coi
