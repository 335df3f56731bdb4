#pragma once

// Embedding vectors and pluggable embedding providers.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "coi/call_cache.hpp"
#include "coi/corpus.hpp"
#include "coi/error.hpp"
#include "coi/hashing.hpp"
#include "coi/http_client.hpp"

namespace coi {

class EmbeddingVector {
public:
    EmbeddingVector() = default;
    explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
        if (values_.empty()) throw InvalidArgument("embedding must have at least one dimension");
        for (double v : values_) {
            if (!std::isfinite(v)) throw InvalidArgument("embedding contains a non-finite value");
        }
    }

    std::size_t dims() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }

    double norm() const noexcept {
        double s = 0.0;
        for (double v : values_) s += v * v;
        return std::sqrt(s);
    }

    /// Unit-L2 copy. Zero vectors cannot be normalized.
    EmbeddingVector normalized() const {
        double n = norm();
        if (n == 0.0) throw InvalidArgument("cannot normalize a zero vector");
        std::vector<double> out(values_);
        for (double& v : out) v /= n;
        return EmbeddingVector(std::move(out));
    }

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

private:
    std::vector<double> values_;
};

/// Dot product of two unit vectors.
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dims() != b.dims()) {
        throw InvalidArgument("dimension mismatch: " + std::to_string(a.dims()) + " vs " +
                              std::to_string(b.dims()));
    }
    auto x = a.values();
    auto y = b.values();
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return std::clamp(s, -1.0, 1.0);
}

/// Similarity as used by adherence thresholds: cosine clamped to [0, 1].
inline double similarity01(const EmbeddingVector& a, const EmbeddingVector& b) {
    return std::clamp(cosine(a, b), 0.0, 1.0);
}

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    /// One unit-normalized vector per input, in input order.
    virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;

    virtual std::string name() const = 0;

    EmbeddingVector embed_one(const std::string& text) {
        return embed(std::span<const std::string>(&text, 1)).front();
    }
};

inline void require_nonempty_texts(std::span<const std::string> texts) {
    for (const auto& t : texts) {
        if (t.find_first_not_of(" \t\r\n\f\v") == std::string::npos) {
            throw InvalidArgument("cannot embed an empty string");
        }
    }
}

/// Lowercases and trims surrounding ASCII punctuation; falls back to the raw token
/// when nothing would remain.
inline std::string normalize_token(std::string_view tok) {
    std::size_t b = 0, e = tok.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(tok[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(tok[e - 1]))) --e;
    if (b == e) {
        b = 0;
        e = tok.size();
    }
    std::string out(tok.substr(b, e - b));
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

/// Bag-of-words embedding: each normalized token adds 1 to bucket
/// fnv1a64(token) mod dims, then the count vector is L2-normalized.
class HashedEmbedder final : public EmbeddingProvider {
public:
    explicit HashedEmbedder(std::size_t dims = 256) : dims_(dims) {
        if (dims == 0) throw InvalidArgument("hashed embedder needs dims > 0");
    }

    std::size_t bucket(std::string_view token) const {
        return static_cast<std::size_t>(fnv1a64(normalize_token(token)) % dims_);
    }

    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
        require_nonempty_texts(texts);
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& text : texts) {
            std::vector<double> counts(dims_, 0.0);
            for (const auto& tok : tokenize(text)) counts[bucket(tok)] += 1.0;
            out.push_back(EmbeddingVector(std::move(counts)).normalized());
        }
        return out;
    }

    std::string name() const override { return "hashed-" + std::to_string(dims_); }
    std::size_t dims() const noexcept { return dims_; }

private:
    std::size_t dims_;
};

/// OpenAI-compatible `/embeddings` client. Each text is cached individually by
/// (model, text) so overlapping batches reuse prior results.
class RemoteEmbedder final : public EmbeddingProvider {
public:
    RemoteEmbedder(std::string model_id, HttpEndpoint endpoint, RetryPolicy retry = {},
                   std::shared_ptr<CallCache> cache = nullptr, bool offline = false,
                   std::size_t batch_size = 64)
        : model_id_(std::move(model_id)),
          endpoint_(std::move(endpoint)),
          retry_(retry),
          cache_(std::move(cache)),
          offline_(offline),
          batch_size_(batch_size) {}

    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
        require_nonempty_texts(texts);
        std::vector<EmbeddingVector> out(texts.size());
        std::vector<std::size_t> missing;
        std::vector<std::string> keys(texts.size());
        for (std::size_t i = 0; i < texts.size(); ++i) {
            keys[i] = CallCache::key_for(
                nlohmann::json{{"kind", "embedding"}, {"model", model_id_}, {"input", texts[i]}}
                    .dump());
            if (cache_) {
                if (auto hit = cache_->get(keys[i])) {
                    out[i] = EmbeddingVector(nlohmann::json::parse(*hit).get<std::vector<double>>());
                    continue;
                }
            }
            missing.push_back(i);
        }
        if (!missing.empty() && offline_) {
            throw ProviderError("embedding cache miss while offline", 0);
        }
        for (std::size_t b = 0; b < missing.size(); b += batch_size_) {
            std::size_t e = std::min(missing.size(), b + batch_size_);
            nlohmann::json input = nlohmann::json::array();
            for (std::size_t i = b; i < e; ++i) input.push_back(texts[missing[i]]);
            auto response = post_json(endpoint_, "/embeddings",
                                      {{"model", model_id_}, {"input", input}}, retry_);
            auto vectors = parse_response(response, e - b);
            for (std::size_t i = b; i < e; ++i) {
                auto v = EmbeddingVector(std::move(vectors[i - b])).normalized();
                if (cache_) {
                    cache_->put(keys[missing[i]],
                                nlohmann::json(std::vector<double>(v.values().begin(),
                                                                   v.values().end()))
                                    .dump());
                }
                out[missing[i]] = std::move(v);
            }
            ++requests_;
        }
        return out;
    }

    std::string name() const override { return model_id_; }
    std::size_t requests() const noexcept { return requests_; }

private:
    static std::vector<std::vector<double>> parse_response(const nlohmann::json& r,
                                                           std::size_t expected) {
        if (!r.contains("data") || !r["data"].is_array() || r["data"].size() != expected) {
            throw ProviderError("embedding response has wrong shape", 1);
        }
        std::vector<std::vector<double>> out(expected);
        for (std::size_t pos = 0; pos < expected; ++pos) {
            const auto& item = r["data"][pos];
            std::size_t idx = item.value("index", pos);
            if (idx >= expected) throw ProviderError("embedding index out of range", 1);
            out[idx] = item.at("embedding").get<std::vector<double>>();
        }
        return out;
    }

    std::string model_id_;
    HttpEndpoint endpoint_;
    RetryPolicy retry_;
    std::shared_ptr<CallCache> cache_;
    bool offline_;
    std::size_t batch_size_;
    std::size_t requests_ = 0;
};

struct EmbeddingProviderConfig {
    enum class Kind { remote, hashed };
    Kind kind = Kind::hashed;
    std::string model_id = "text-embedding-3-large";
    std::size_t dims = 256;
    HttpEndpoint endpoint;
    RetryPolicy retry;
};

inline std::unique_ptr<EmbeddingProvider> make_embedder(const EmbeddingProviderConfig& cfg,
                                                        std::shared_ptr<CallCache> cache = nullptr,
                                                        bool offline = false) {
    switch (cfg.kind) {
        case EmbeddingProviderConfig::Kind::hashed:
            return std::make_unique<HashedEmbedder>(cfg.dims);
        case EmbeddingProviderConfig::Kind::remote:
            return std::make_unique<RemoteEmbedder>(cfg.model_id, cfg.endpoint, cfg.retry,
                                                    std::move(cache), offline);
    }
    throw InvalidArgument("unknown embedder kind");
}

}  // namespace coi
