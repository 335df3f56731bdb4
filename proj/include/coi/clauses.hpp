#pragma once

// Subject-predicate-object clause extraction.

#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "coi/corpus.hpp"
#include "coi/embedding.hpp"

namespace coi {

struct Clause {
    std::string subject;
    std::string predicate;
    std::string object;  // may be empty
    std::size_t sentence_index = 0;

    /// "{subject} {predicate} {object}" without a trailing space for empty objects.
    std::string render() const {
        std::string s = subject + " " + predicate;
        if (!object.empty()) s += " " + object;
        return s;
    }

    friend bool operator==(const Clause&, const Clause&) = default;
};

inline void to_json(nlohmann::json& j, const Clause& c) {
    j = nlohmann::json{{"subject", c.subject},
                       {"predicate", c.predicate},
                       {"object", c.object},
                       {"sentence_index", c.sentence_index}};
}

inline void from_json(const nlohmann::json& j, Clause& c) {
    j.at("subject").get_to(c.subject);
    j.at("predicate").get_to(c.predicate);
    c.object = j.value("object", "");
    c.sentence_index = j.value("sentence_index", std::size_t{0});
}

class ClauseExtractor {
public:
    virtual ~ClauseExtractor() = default;
    virtual std::vector<Clause> extract(std::string_view text) const = 0;
    virtual std::string name() const = 0;
};

namespace detail {

inline bool in_list(std::string_view w, std::initializer_list<std::string_view> words) {
    for (auto x : words)
        if (x == w) return true;
    return false;
}

inline bool is_abbreviation(std::string_view tok) {
    std::string w = normalize_token(tok);
    return in_list(w, {"e.g", "i.e", "etc", "vs", "p", "pp", "mr", "mrs", "dr", "cf", "fig", "no"});
}

inline bool ends_sentence(std::string_view tok) {
    std::size_t e = tok.size();
    while (e > 0 && (tok[e - 1] == '"' || tok[e - 1] == '\'' || tok[e - 1] == ')')) --e;
    if (e == 0) return false;
    char c = tok[e - 1];
    if (c == '!' || c == '?') return true;
    if (c != '.') return false;
    return !is_abbreviation(tok.substr(0, e));
}

inline std::string trim_label(std::string s) {
    auto strip = [](char c) {
        return std::isspace(static_cast<unsigned char>(c)) ||
               std::string_view(".,;:!?\"')([]").find(c) != std::string_view::npos;
    };
    std::size_t b = 0, e = s.size();
    while (b < e && strip(s[b])) ++b;
    while (e > b && strip(s[e - 1])) --e;
    return s.substr(b, e - b);
}

inline bool is_auxiliary(std::string_view w) {
    return in_list(w, {"is",    "are",   "was",    "were",   "be",    "been",  "being",
                       "am",    "has",   "have",   "had",    "do",    "does",  "did",
                       "can",   "could", "will",   "would",  "shall", "should", "may",
                       "might", "must",  "isn't",  "aren't", "doesn't", "don't", "can't",
                       "won't", "didn't", "cannot"});
}

inline bool is_base_verb(std::string_view w) {
    return in_list(
        w, {"use",     "make",    "provide", "create",   "return",   "call",     "define",
            "contain", "allow",   "take",    "give",     "get",      "set",      "need",
            "run",     "store",   "hold",    "represent", "implement", "convert", "pack",
            "explore", "refer",   "mean",    "add",      "remove",   "apply",    "print",
            "read",    "write",   "show",    "work",     "see",      "let",      "help",
            "become",  "keep",    "find",    "change",   "declare",  "pass",     "compute",
            "produce", "support", "require", "depend",   "inject",   "extend",   "override",
            "specify", "describe", "consist", "belong",  "know",     "say",      "tell",
            "send",    "receive", "invoke",  "evaluate", "assign",   "throw",    "catch",
            "import",  "load",    "open",    "close",    "compare",  "check",    "build",
            "improve", "ensure",  "avoid",   "follow",   "depends",  "lets",     "put",
            "understand", "initialize", "yield", "wrap", "happen",  "differ",   "mutate"});
}

inline bool blocks_verb(std::string_view prev) {
    return in_list(prev, {"the",   "a",     "an",   "this", "that",  "these", "those", "my",
                          "your",  "his",   "her",  "its",  "our",   "their", "some",  "any",
                          "each",  "every", "no",   "of",   "to",    "in",    "for",   "with",
                          "on",    "at",    "by",   "from", "as",    "into",  "about", "many",
                          "several", "all", "both", "such", "other", "more", "most"});
}

inline bool suffix_verb(std::string_view w) {
    auto ends = [&](std::string_view s) {
        return w.size() > s.size() && w.substr(w.size() - s.size()) == s;
    };
    if (w.size() > 3 && ends("ed")) return true;
    if (w.size() > 4 && ends("ing")) return true;
    if (w.size() > 3 && ends("s") && !ends("ss") && !ends("us") && !ends("is") && !ends("'s")) {
        return true;
    }
    return false;
}

inline bool is_adverb(std::string_view w) {
    return in_list(w, {"not", "also", "often", "always", "never", "usually", "only", "then",
                       "just", "still", "already", "typically", "generally", "n't"});
}

inline bool is_wh_word(std::string_view w) {
    return in_list(w, {"what", "who", "why", "how", "when", "where", "which", "whose", "whom"});
}

inline bool looks_proper(std::string_view tok) {
    return !tok.empty() && std::isupper(static_cast<unsigned char>(tok.front()));
}

}  // namespace detail

/// Sentences as token lists, split after tokens ending in terminal punctuation and at
/// blank lines.
inline std::vector<std::vector<std::string>> split_sentences(std::string_view text) {
    std::vector<std::vector<std::string>> sentences;
    std::vector<std::string> current;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
        auto toks = tokenize(line);
        if (toks.empty() && !current.empty()) {
            sentences.push_back(std::move(current));
            current.clear();
        }
        for (auto& t : toks) {
            bool end = detail::ends_sentence(t);
            current.push_back(std::move(t));
            if (end) {
                sentences.push_back(std::move(current));
                current.clear();
            }
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    if (!current.empty()) sentences.push_back(std::move(current));
    return sentences;
}

/// Heuristic extractor. Within each clause segment the first verb-like token starts the
/// predicate. A token is verb-like if it is a known auxiliary or base verb, or if it carries
/// -s/-ed/-ing morphology. Tokens before the verb form the subject and tokens after the
/// verb group form the object. Segments with no verb, or with the verb first, yield nothing.
class RuleBasedClauseExtractor final : public ClauseExtractor {
public:
    std::vector<Clause> extract(std::string_view text) const override {
        std::vector<Clause> out;
        auto sentences = split_sentences(text);
        for (std::size_t si = 0; si < sentences.size(); ++si) {
            for (const auto& seg : segments(sentences[si])) {
                if (auto c = extract_segment(seg, si)) out.push_back(std::move(*c));
            }
        }
        return out;
    }

    std::string name() const override { return "rule-based"; }

private:
    // Splits at ';' and at ", and" / ", but" / ", or" / ", so" coordinations.
    static std::vector<std::vector<std::string>> segments(const std::vector<std::string>& toks) {
        std::vector<std::vector<std::string>> segs(1);
        for (std::size_t i = 0; i < toks.size(); ++i) {
            const auto& t = toks[i];
            bool split_after = false;
            if (!t.empty() && t.back() == ';') split_after = true;
            if (!t.empty() && t.back() == ',' && i + 1 < toks.size()) {
                auto next = normalize_token(toks[i + 1]);
                if (detail::in_list(next, {"and", "but", "or", "so"}) && i + 2 < toks.size()) {
                    segs.back().push_back(t);
                    segs.emplace_back();
                    ++i;  // drop the conjunction
                    continue;
                }
            }
            segs.back().push_back(t);
            if (split_after && i + 1 < toks.size()) segs.emplace_back();
        }
        return segs;
    }

    static bool verb_at(const std::vector<std::string>& seg, std::size_t i) {
        if (i == 0) return false;
        std::string w = normalize_token(seg[i]);
        if (detail::is_auxiliary(w)) return true;
        std::string prev = normalize_token(seg[i - 1]);
        if (detail::blocks_verb(prev)) return false;
        if (detail::looks_proper(seg[i])) return false;
        return detail::is_base_verb(w) || detail::suffix_verb(w);
    }

    static bool continues_predicate(std::string_view tok) {
        std::string w = normalize_token(tok);
        if (detail::is_auxiliary(w) || detail::is_adverb(w)) return true;
        if (detail::is_base_verb(w)) return true;
        auto ends = [&](std::string_view s) {
            return w.size() > s.size() + 1 && w.substr(w.size() - s.size()) == s;
        };
        return ends("ed") || ends("ing") || ends("en");
    }

    static Clause make_clause(const std::vector<std::string>& seg, std::size_t subj_begin,
                              std::size_t v, std::size_t end, std::size_t sentence_index) {
        Clause c;
        c.subject = detail::trim_label(join(seg, " ", subj_begin, v));
        c.predicate = detail::trim_label(join(seg, " ", v, end));
        c.object = detail::trim_label(join(seg, " ", end, seg.size()));
        c.sentence_index = sentence_index;
        return c;
    }

    // "How do I convert X?" / "Does a list hold items?": the subject sits between the
    // fronted auxiliary and the main verb.
    static std::optional<Clause> inverted_question(const std::vector<std::string>& seg,
                                                   std::size_t sentence_index) {
        if (seg.size() < 3 || seg.back().back() != '?') return std::nullopt;
        std::size_t aux = detail::is_wh_word(normalize_token(seg[0])) ? 1 : 0;
        if (!detail::is_auxiliary(normalize_token(seg[aux]))) return std::nullopt;
        for (std::size_t v = aux + 2; v < seg.size(); ++v) {
            std::string w = normalize_token(seg[v]);
            if (detail::blocks_verb(normalize_token(seg[v - 1])) || detail::looks_proper(seg[v])) continue;
            if (!detail::is_base_verb(w)) continue;
            auto c = make_clause(seg, aux + 1, v, v + 1, sentence_index);
            if (c.subject.empty()) return std::nullopt;
            return c;
        }
        return std::nullopt;
    }

    static std::optional<Clause> extract_segment(const std::vector<std::string>& seg,
                                                 std::size_t sentence_index) {
        if (auto q = inverted_question(seg, sentence_index)) return q;
        for (std::size_t v = 1; v < seg.size(); ++v) {
            if (!verb_at(seg, v)) continue;
            std::size_t end = v + 1;
            // A verb token carrying trailing punctuation closes the group.
            auto closes = [](const std::string& t) {
                return !t.empty() && std::ispunct(static_cast<unsigned char>(t.back())) &&
                       t.back() != '\'';
            };
            if (!closes(seg[v])) {
                while (end < seg.size() && continues_predicate(seg[end])) {
                    ++end;
                    if (closes(seg[end - 1])) break;
                }
            }
            auto c = make_clause(seg, 0, v, end, sentence_index);
            if (c.subject.empty() || c.predicate.empty()) return std::nullopt;
            return c;
        }
        return std::nullopt;
    }
};

}  // namespace coi
