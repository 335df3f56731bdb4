#pragma once

// Source documents and overlapping token-window chunking.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "coi/error.hpp"

namespace coi {

struct PageOffset {
    int page = 1;
    std::size_t token_index = 0;

    friend bool operator==(const PageOffset&, const PageOffset&) = default;
};

struct Document {
    std::string id;
    std::string title;
    std::string text;                     // plain text, page sentinels removed
    std::vector<PageOffset> page_offsets; // strictly increasing in both fields
};

struct PageSpan {
    int first = 1;
    int last = 1;

    friend bool operator==(const PageSpan&, const PageSpan&) = default;
};

struct Chunk {
    std::string id;
    std::string doc_id;
    std::size_t token_start = 0;
    std::size_t token_end = 0;  // exclusive
    std::string text;
    PageSpan page_span;

    std::size_t size() const noexcept { return token_end - token_start; }

    friend bool operator==(const Chunk&, const Chunk&) = default;
};

struct ChunkingParams {
    std::size_t size = 150;
    std::size_t overlap = 75;
    std::size_t min_tokens = 100;
};

inline bool is_space(char c) noexcept {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

/// Splits on runs of whitespace. Never yields empty tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        std::size_t j = i;
        while (j < text.size() && !is_space(text[j])) ++j;
        if (j > i) tokens.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return tokens;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep,
                        std::size_t begin = 0, std::size_t end = std::string::npos) {
    end = std::min(end, parts.size());
    std::string out;
    for (std::size_t i = begin; i < end; ++i) {
        if (i > begin) out.append(sep);
        out.append(parts[i]);
    }
    return out;
}

namespace detail {

// Matches a page sentinel line: optional form feed, then @@PAGE n@@.
inline std::optional<int> parse_page_sentinel(std::string_view line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    if (!line.empty() && line.front() == '\x0c') line.remove_prefix(1);
    static const std::regex pattern(R"(^@@PAGE ([0-9]+)@@$)");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_match(line.begin(), line.end(), m, pattern)) return std::nullopt;
    int page = std::stoi(m[1].str());
    if (page < 1) return std::nullopt;
    return page;
}

}  // namespace detail

/// Builds a Document from raw text, stripping `\x0c@@PAGE n@@` sentinel lines and
/// recording the token index at which each page starts.
///
/// A sentinel followed by no tokens before the next sentinel is superseded by it.
/// Trailing sentinels with no tokens after them are dropped. Page numbers that do not
/// increase are rejected.
inline Document parse_document(std::string id, std::string title, std::string_view raw) {
    Document doc{std::move(id), std::move(title), {}, {}};
    std::string body;
    body.reserve(raw.size());
    std::size_t tokens_so_far = 0;
    std::optional<int> pending_page;

    std::size_t pos = 0;
    while (pos <= raw.size()) {
        std::size_t nl = raw.find('\n', pos);
        std::string_view line =
            raw.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        if (auto page = detail::parse_page_sentinel(line)) {
            int prev = doc.page_offsets.empty() ? 0 : doc.page_offsets.back().page;
            if (*page <= prev) {
                throw ParseError("page marker " + std::to_string(*page) +
                                 " does not increase after page " + std::to_string(prev));
            }
            pending_page = *page;
        } else {
            auto toks = tokenize(line);
            if (!toks.empty() && pending_page) {
                doc.page_offsets.push_back({*pending_page, tokens_so_far});
                pending_page.reset();
            }
            tokens_so_far += toks.size();
            body.append(line);
            body.push_back('\n');
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    while (!body.empty() && body.back() == '\n') body.pop_back();
    doc.text = std::move(body);
    return doc;
}

/// Page containing token `index`. Tokens before the first marker belong to the first
/// marked page; documents without markers are a single page 1.
inline int page_of(const Document& doc, std::size_t index) {
    if (doc.page_offsets.empty()) return 1;
    auto it = std::upper_bound(
        doc.page_offsets.begin(), doc.page_offsets.end(), index,
        [](std::size_t idx, const PageOffset& p) { return idx < p.token_index; });
    if (it == doc.page_offsets.begin()) return doc.page_offsets.front().page;
    return std::prev(it)->page;
}

/// Token-window spans [start, end) for a document of `n` tokens.
///
/// Windows start every (size - overlap) tokens. A final tail shorter than `min_tokens`
/// is not emitted; the previous window is extended to the document end instead.
inline std::vector<std::pair<std::size_t, std::size_t>> chunk_spans(std::size_t n,
                                                                   const ChunkingParams& p) {
    if (p.overlap >= p.size) throw InvalidArgument("chunk overlap must be smaller than size");
    if (p.min_tokens == 0 || p.min_tokens > p.size) {
        throw InvalidArgument("min_tokens must be in (0, size]");
    }
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    if (n == 0) return spans;
    if (n <= p.size) {
        spans.emplace_back(0, n);
        return spans;
    }
    const std::size_t stride = p.size - p.overlap;
    std::size_t start = 0;
    while (start + p.size < n) {
        spans.emplace_back(start, start + p.size);
        start += stride;
    }
    if (n - start >= p.min_tokens) {
        spans.emplace_back(start, n);
    } else {
        spans.back().second = n;
    }
    return spans;
}

inline std::vector<Chunk> chunk(const Document& doc, const ChunkingParams& params = {}) {
    const auto tokens = tokenize(doc.text);
    const auto spans = chunk_spans(tokens.size(), params);
    std::vector<Chunk> chunks;
    chunks.reserve(spans.size());
    for (std::size_t i = 0; i < spans.size(); ++i) {
        auto [s, e] = spans[i];
        Chunk c;
        c.id = doc.id + "#" + std::to_string(i);
        c.doc_id = doc.id;
        c.token_start = s;
        c.token_end = e;
        c.text = join(tokens, " ", s, e);
        c.page_span = {page_of(doc, s), page_of(doc, e - 1)};
        chunks.push_back(std::move(c));
    }
    return chunks;
}

inline void to_json(nlohmann::json& j, const Chunk& c) {
    j = nlohmann::json{{"id", c.id},
                       {"doc_id", c.doc_id},
                       {"token_start", c.token_start},
                       {"token_end", c.token_end},
                       {"text", c.text},
                       {"page_span", {c.page_span.first, c.page_span.last}}};
}

inline void from_json(const nlohmann::json& j, Chunk& c) {
    j.at("id").get_to(c.id);
    j.at("doc_id").get_to(c.doc_id);
    j.at("token_start").get_to(c.token_start);
    j.at("token_end").get_to(c.token_end);
    j.at("text").get_to(c.text);
    const auto& span = j.at("page_span");
    c.page_span = {span.at(0).get<int>(), span.at(1).get<int>()};
}

}  // namespace coi
