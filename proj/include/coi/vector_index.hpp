#pragma once

// Exact top-k cosine search over a flat collection of unit vectors.

#include <algorithm>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "coi/embedding.hpp"
#include "coi/error.hpp"
#include "coi/json_lines.hpp"

namespace coi {

struct ScoredKey {
    std::string key;
    double score = 0.0;

    friend bool operator==(const ScoredKey&, const ScoredKey&) = default;
};

/// Descending score, then ascending key.
inline bool ranks_before(const ScoredKey& a, const ScoredKey& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.key < b.key;
}

class VectorIndex {
public:
    struct Entry {
        std::string key;
        EmbeddingVector vector;
        nlohmann::json payload;
    };

    VectorIndex() = default;

    void add(std::string key, EmbeddingVector vector, nlohmann::json payload = nullptr) {
        if (!entries_.empty() && vector.dims() != dims_) {
            throw InvalidArgument("index holds " + std::to_string(dims_) +
                                  "-dim vectors, got " + std::to_string(vector.dims()));
        }
        if (by_key_.contains(key)) throw InvalidArgument("duplicate index key: " + key);
        dims_ = vector.dims();
        by_key_.emplace(key, entries_.size());
        entries_.push_back({std::move(key), std::move(vector), std::move(payload)});
    }

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::size_t dims() const noexcept { return dims_; }
    const std::vector<Entry>& entries() const noexcept { return entries_; }

    const Entry* find(const std::string& key) const {
        auto it = by_key_.find(key);
        return it == by_key_.end() ? nullptr : &entries_[it->second];
    }

    const Entry& at(const std::string& key) const {
        if (auto* e = find(key)) return *e;
        throw InvalidArgument("no index entry for key " + key);
    }

    /// Exactly min(k, size()) results, scores non-increasing, ties by ascending key.
    std::vector<ScoredKey> top_k(const EmbeddingVector& query, std::size_t k) const {
        if (k == 0) throw InvalidArgument("top_k needs k >= 1");
        if (entries_.empty()) throw InvalidArgument("top_k on an empty index");
        std::vector<ScoredKey> scored;
        scored.reserve(entries_.size());
        for (const auto& e : entries_) scored.push_back({e.key, cosine(query, e.vector)});
        const std::size_t n = std::min(k, scored.size());
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n),
                          scored.end(), ranks_before);
        scored.resize(n);
        return scored;
    }

    /// JSON Lines: {"key", "payload", "vector"} per entry, in insertion order.
    std::string serialize() const {
        std::string out;
        for (const auto& e : entries_) {
            nlohmann::json j{{"key", e.key},
                             {"payload", e.payload},
                             {"vector", std::vector<double>(e.vector.values().begin(),
                                                            e.vector.values().end())}};
            out += j.dump();
            out.push_back('\n');
        }
        return out;
    }

    void save(const std::string& path) const { write_file(path, serialize()); }

    static VectorIndex load(const std::string& path) {
        VectorIndex idx;
        for_each_json_line(path, [&](const nlohmann::json& j, std::size_t lineno) {
            try {
                idx.add(j.at("key").get<std::string>(),
                        EmbeddingVector(j.at("vector").get<std::vector<double>>()),
                        j.value("payload", nlohmann::json()));
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(e.what(), lineno);
            }
        });
        return idx;
    }

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> by_key_;
    std::size_t dims_ = 0;
};

}  // namespace coi
