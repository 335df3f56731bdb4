#pragma once

// Implicit-question planning: choose up to m follow-up questions for a primary question,
// each backed by chunks that no other selected question uses.

#include <algorithm>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "coi/clauses.hpp"
#include "coi/corpus.hpp"
#include "coi/embedding.hpp"
#include "coi/question.hpp"
#include "coi/question_bank.hpp"
#include "coi/vector_index.hpp"

namespace coi {

/// Chunks of one source plus their embedding index (keyed by chunk id).
class ChunkStore {
public:
    ChunkStore() = default;

    ChunkStore(std::vector<Chunk> chunks, EmbeddingProvider& embedder) : chunks_(std::move(chunks)) {
        if (chunks_.empty()) return;
        std::vector<std::string> texts;
        texts.reserve(chunks_.size());
        for (const auto& c : chunks_) texts.push_back(c.text);
        auto vectors = embedder.embed(texts);
        for (std::size_t i = 0; i < chunks_.size(); ++i) {
            by_id_.emplace(chunks_[i].id, i);
            index_.add(chunks_[i].id, std::move(vectors[i]));
        }
    }

    const std::vector<Chunk>& chunks() const noexcept { return chunks_; }
    const VectorIndex& index() const noexcept { return index_; }
    bool empty() const noexcept { return chunks_.empty(); }

    const Chunk& at(const std::string& id) const {
        auto it = by_id_.find(id);
        if (it == by_id_.end()) throw InvalidArgument("unknown chunk id " + id);
        return chunks_[it->second];
    }

private:
    std::vector<Chunk> chunks_;
    std::unordered_map<std::string, std::size_t> by_id_;
    VectorIndex index_;
};

struct ScoredChunk {
    Chunk chunk;
    double score = 0.0;

    friend bool operator==(const ScoredChunk&, const ScoredChunk&) = default;
};

/// Top-k chunks for a query vector, resolved to chunk values.
inline std::vector<ScoredChunk> retrieve(const ChunkStore& store, const EmbeddingVector& query,
                                         std::size_t k) {
    std::vector<ScoredChunk> out;
    for (auto& hit : store.index().top_k(query, k)) out.push_back({store.at(hit.key), hit.score});
    return out;
}

struct CandidateQuestion {
    enum class Origin { bank, template_ };
    std::string text;
    Origin origin = Origin::bank;
    EmbeddingVector question_vector;

    friend bool operator==(const CandidateQuestion&, const CandidateQuestion&) = default;
};

inline std::string to_string(CandidateQuestion::Origin o) {
    return o == CandidateQuestion::Origin::bank ? "bank" : "template";
}

struct SelectedQuestion {
    CandidateQuestion question;
    std::vector<ScoredChunk> chunks;  // non-empty, descending score
    double best_score = 0.0;

    friend bool operator==(const SelectedQuestion&, const SelectedQuestion&) = default;
};

struct IllocutionPlan {
    QuestionRecord primary;
    std::vector<SelectedQuestion> selected;  // descending best_score, at most m
    /// Chunk ids that also appear in the primary question's own retrieval.
    std::vector<std::string> shared_with_primary;

    bool empty() const noexcept { return selected.empty(); }

    friend bool operator==(const IllocutionPlan&, const IllocutionPlan&) = default;
};

struct PlannerParams {
    std::size_t pool_size = 25;  // M: bank candidates
    std::size_t chunks_per_candidate = 10;  // k
    std::size_t max_selected = 5;  // m
    /// A retrieved chunk supports a candidate only if its score exceeds this.
    double min_support = 0.0;
};

/// Configuration lint: the candidate pool should be at least five times the budget.
constexpr bool pool_ratio_check(std::size_t pool_size, std::size_t max_selected) noexcept {
    return pool_size >= 5 * max_selected;
}

/// Builds the plan:
///  1. the M bank questions closest to the primary question text;
///  2. plus template "What is {X}?" questions, appended after the bank candidates;
///  3. up to k chunks per candidate, dropping candidates with no supporting chunk;
///  4. each chunk kept only by the candidate that scored it highest (earlier candidate
///     on ties), dropping candidates left without chunks;
///  5. candidates ranked by their best remaining chunk score, keeping the top m.
inline IllocutionPlan plan(const QuestionRecord& primary, const QuestionBank& bank,
                           const ChunkStore& store, EmbeddingProvider& embedder,
                           const ClauseExtractor& extractor, const PlannerParams& params = {}) {
    if (params.max_selected > params.pool_size) {
        throw InvalidArgument("max_selected must not exceed pool_size");
    }
    IllocutionPlan result;
    result.primary = primary;
    // Without a bank the pipeline degrades to plain retrieval.
    if (store.empty() || bank.empty()) return result;

    std::vector<CandidateQuestion> candidates;
    if (params.pool_size > 0) {
        auto query = embedder.embed_one(primary.query_text());
        for (const auto& hit : bank.index.top_k(query, params.pool_size)) {
            const auto& entry = bank.index.at(hit.key);
            std::string text = entry.payload.is_object()
                                   ? entry.payload.value("question", std::string())
                                   : std::string();
            if (text.empty()) {
                auto it = std::find_if(bank.questions.begin(), bank.questions.end(),
                                       [&](const auto& q) { return q.id == hit.key; });
                if (it == bank.questions.end()) throw InvalidArgument("bank lacks " + hit.key);
                text = it->question;
            }
            candidates.push_back({std::move(text), CandidateQuestion::Origin::bank, entry.vector});
        }
    }
    auto templated = template_questions(primary, extractor);
    if (!templated.empty()) {
        auto vectors = embedder.embed(templated);
        for (std::size_t i = 0; i < templated.size(); ++i) {
            candidates.push_back(
                {templated[i], CandidateQuestion::Origin::template_, std::move(vectors[i])});
        }
    }

    // Step 3.
    std::vector<std::vector<ScoredChunk>> retrieved(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        for (auto& sc : retrieve(store, candidates[c].question_vector, params.chunks_per_candidate)) {
            if (sc.score > params.min_support) retrieved[c].push_back(std::move(sc));
        }
    }

    // Step 4: owner of each chunk id is the candidate with the highest score for it.
    std::map<std::string, std::pair<double, std::size_t>> owner;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        for (const auto& sc : retrieved[c]) {
            auto [it, inserted] = owner.try_emplace(sc.chunk.id, sc.score, c);
            if (!inserted && sc.score > it->second.first) it->second = {sc.score, c};
        }
    }

    std::vector<SelectedQuestion> survivors;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        SelectedQuestion sq{candidates[c], {}, 0.0};
        for (auto& sc : retrieved[c]) {
            if (owner.at(sc.chunk.id).second == c) sq.chunks.push_back(std::move(sc));
        }
        if (sq.chunks.empty()) continue;
        sq.best_score = sq.chunks.front().score;
        survivors.push_back(std::move(sq));
    }

    // Step 5. Stable sort keeps candidate order among equal scores.
    std::stable_sort(survivors.begin(), survivors.end(),
                     [](const auto& a, const auto& b) { return a.best_score > b.best_score; });
    if (survivors.size() > params.max_selected) survivors.resize(params.max_selected);
    result.selected = std::move(survivors);
    return result;
}

/// Records which planned chunk ids also occur in the primary retrieval.
inline void flag_primary_overlap(IllocutionPlan& plan, const std::vector<ScoredChunk>& primary) {
    std::set<std::string> ids;
    for (const auto& sc : primary) ids.insert(sc.chunk.id);
    plan.shared_with_primary.clear();
    for (const auto& sq : plan.selected) {
        for (const auto& sc : sq.chunks) {
            if (ids.contains(sc.chunk.id)) plan.shared_with_primary.push_back(sc.chunk.id);
        }
    }
}

inline nlohmann::json plan_to_json(const IllocutionPlan& p) {
    nlohmann::json selected = nlohmann::json::array();
    for (const auto& sq : p.selected) {
        nlohmann::json chunks = nlohmann::json::array();
        for (const auto& sc : sq.chunks) chunks.push_back({{"id", sc.chunk.id}, {"score", sc.score}});
        selected.push_back({{"question", sq.question.text},
                            {"origin", to_string(sq.question.origin)},
                            {"best_score", sq.best_score},
                            {"chunks", chunks}});
    }
    return {{"primary_id", p.primary.id},
            {"selected", selected},
            {"shared_with_primary", p.shared_with_primary}};
}

}  // namespace coi
