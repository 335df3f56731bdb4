#pragma once

// Test doubles and independent reference implementations shared by the unit tests and
// the acceptance suite.

#include <algorithm>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "coi/coi_planner.hpp"

namespace coi::testing {

/// Embedder with a fixed text -> vector table. Unknown texts are an error.
class TableEmbedder final : public EmbeddingProvider {
public:
    std::map<std::string, EmbeddingVector> table;

    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
        std::vector<EmbeddingVector> out;
        for (const auto& t : texts) {
            auto it = table.find(t);
            if (it == table.end()) throw InvalidArgument("no vector for '" + t + "'");
            out.push_back(it->second);
        }
        return out;
    }
    std::string name() const override { return "table"; }
};

struct FixedExtractor final : ClauseExtractor {
    std::vector<Clause> clauses;
    std::vector<Clause> extract(std::string_view) const override { return clauses; }
    std::string name() const override { return "fixed"; }
};

inline EmbeddingVector random_unit(std::mt19937_64& rng, std::size_t dims) {
    std::normal_distribution<double> g;
    std::vector<double> v(dims);
    for (auto& x : v) x = g(rng);
    return EmbeddingVector(v).normalized();
}

inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.dims(); ++i) s += a.values()[i] * b.values()[i];
    return std::clamp(s, -1.0, 1.0);
}

struct SimSelected {
    std::string question;
    std::vector<std::string> chunk_ids;
    double best_score;
};

/// Straight-line reference for planner steps 1-5 using full scans instead of the index.
///   bank: (id, text, vector); templates: (text, vector) in order; chunks: (id, vector).
inline std::vector<SimSelected> simulate_plan(
    const EmbeddingVector& primary,
    const std::vector<std::tuple<std::string, std::string, EmbeddingVector>>& bank,
    const std::vector<std::pair<std::string, EmbeddingVector>>& templates,
    const std::vector<std::pair<std::string, EmbeddingVector>>& chunks, std::size_t M,
    std::size_t k, std::size_t m) {
    if (bank.empty() || chunks.empty()) return {};
    auto by_score_then_key = [](const std::pair<double, std::string>& a,
                                const std::pair<double, std::string>& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    };

    // Step 1: rank every bank question against the primary, keep M.
    std::vector<std::pair<double, std::string>> ranked;
    for (const auto& [id, text, v] : bank) ranked.push_back({dot(primary, v), id});
    std::sort(ranked.begin(), ranked.end(), by_score_then_key);
    ranked.resize(std::min(M, ranked.size()));
    std::vector<std::pair<std::string, EmbeddingVector>> cands;
    for (const auto& [score, id] : ranked) {
        for (const auto& [bid, text, v] : bank)
            if (bid == id) cands.push_back({text, v});
    }
    // Step 2.
    for (const auto& t : templates) cands.push_back(t);

    // Step 3: top-k chunks per candidate by full scan; only positive scores support.
    std::vector<std::vector<std::pair<double, std::string>>> hits(cands.size());
    for (std::size_t c = 0; c < cands.size(); ++c) {
        std::vector<std::pair<double, std::string>> all;
        for (const auto& [id, v] : chunks) all.push_back({dot(cands[c].second, v), id});
        std::sort(all.begin(), all.end(), by_score_then_key);
        all.resize(std::min(k, all.size()));
        for (auto& h : all)
            if (h.first > 0.0) hits[c].push_back(h);
    }

    // Step 4: for every chunk, find the winning candidate by scanning all of them.
    std::vector<SimSelected> survivors;
    for (std::size_t c = 0; c < cands.size(); ++c) {
        SimSelected s{cands[c].first, {}, 0.0};
        for (const auto& [score, id] : hits[c]) {
            bool wins = true;
            for (std::size_t o = 0; o < cands.size() && wins; ++o) {
                if (o == c) continue;
                for (const auto& [os, oid] : hits[o]) {
                    if (oid != id) continue;
                    if (os > score || (os == score && o < c)) wins = false;
                }
            }
            if (wins) {
                if (s.chunk_ids.empty()) s.best_score = score;
                s.chunk_ids.push_back(id);
            }
        }
        if (!s.chunk_ids.empty()) survivors.push_back(s);
    }

    // Step 5: insertion sort by best score, earlier candidates first on ties.
    std::vector<SimSelected> sorted;
    for (const auto& s : survivors) {
        auto pos = sorted.begin();
        while (pos != sorted.end() && pos->best_score >= s.best_score) ++pos;
        sorted.insert(pos, s);
    }
    if (sorted.size() > m) sorted.resize(m);
    return sorted;
}

}  // namespace coi::testing
