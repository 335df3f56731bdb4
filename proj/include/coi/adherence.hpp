#pragma once

// Source-adherence metrics computed from clause matches against a source text.

#include <algorithm>
#include <cstdio>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coi/clauses.hpp"
#include "coi/embedding.hpp"
#include "coi/error.hpp"
#include "coi/generator.hpp"
#include "coi/prompting.hpp"
#include "coi/question.hpp"
#include "coi/vector_index.hpp"

namespace coi {

enum class MatchMode { whole_clause, component_weighted };

inline std::string to_string(MatchMode m) {
    return m == MatchMode::whole_clause ? "whole_clause" : "component_weighted";
}

inline MatchMode match_mode_from_string(const std::string& s) {
    if (s == "whole_clause") return MatchMode::whole_clause;
    if (s == "component_weighted") return MatchMode::component_weighted;
    throw InvalidArgument("unknown matching mode: " + s);
}

/// Clauses of a source text with the embeddings both matching modes need.
class SourceClauseIndex {
public:
    struct Components {
        EmbeddingVector subject;
        EmbeddingVector predicate;
        std::optional<EmbeddingVector> object;
    };

    SourceClauseIndex(std::vector<Clause> clauses, EmbeddingProvider& embedder,
                      bool with_components = true)
        : clauses_(std::move(clauses)) {
        if (clauses_.empty()) return;
        std::vector<std::string> whole;
        whole.reserve(clauses_.size());
        for (const auto& c : clauses_) whole.push_back(c.render());
        auto vectors = embedder.embed(whole);
        for (std::size_t i = 0; i < clauses_.size(); ++i) {
            index_.add(key_for(i), std::move(vectors[i]), {{"clause", clauses_[i].render()}});
        }
        if (with_components) components_ = embed_components(clauses_, embedder);
    }

    static SourceClauseIndex from_text(std::string_view text, const ClauseExtractor& extractor,
                                       EmbeddingProvider& embedder, bool with_components = true) {
        return SourceClauseIndex(extractor.extract(text), embedder, with_components);
    }

    /// Zero-padded so lexical key order equals clause order.
    static std::string key_for(std::size_t i) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "c%08zu", i);
        return buf;
    }

    const std::vector<Clause>& clauses() const noexcept { return clauses_; }
    const VectorIndex& index() const noexcept { return index_; }
    const std::vector<Components>& components() const noexcept { return components_; }
    bool empty() const noexcept { return clauses_.empty(); }
    bool has_components() const noexcept { return components_.size() == clauses_.size(); }

    static std::vector<Components> embed_components(const std::vector<Clause>& clauses,
                                                    EmbeddingProvider& embedder) {
        std::vector<std::string> texts;
        for (const auto& c : clauses) {
            texts.push_back(c.subject);
            texts.push_back(c.predicate);
            if (!c.object.empty()) texts.push_back(c.object);
        }
        auto vecs = embedder.embed(texts);
        std::vector<Components> out;
        std::size_t k = 0;
        for (const auto& c : clauses) {
            Components comp{std::move(vecs[k]), std::move(vecs[k + 1]), std::nullopt};
            k += 2;
            if (!c.object.empty()) comp.object = std::move(vecs[k++]);
            out.push_back(std::move(comp));
        }
        return out;
    }

private:
    std::vector<Clause> clauses_;
    VectorIndex index_;
    std::vector<Components> components_;
};

struct ClauseMatch {
    Clause ai_clause;
    std::string best_source_clause_id;
    double similarity = 0.0;  // [0, 1]
};

inline double component_similarity(const SourceClauseIndex::Components& a,
                                   const SourceClauseIndex::Components& b) {
    double obj = 0.0;
    if (!a.object && !b.object) {
        obj = 1.0;
    } else if (a.object && b.object) {
        obj = similarity01(*a.object, *b.object);
    }
    return std::clamp(
        (similarity01(a.subject, b.subject) + similarity01(a.predicate, b.predicate) + obj) / 3.0,
        0.0, 1.0);
}

/// Best source clause for each AI clause. Whole-clause mode compares rendered clauses;
/// component mode averages subject, predicate and object similarities.
inline std::vector<ClauseMatch> match_clauses(const std::vector<Clause>& ai,
                                              const SourceClauseIndex& source,
                                              EmbeddingProvider& embedder,
                                              MatchMode mode = MatchMode::whole_clause) {
    if (source.empty()) throw InvalidArgument("cannot match against an empty source clause index");
    std::vector<ClauseMatch> out;
    if (ai.empty()) return out;
    if (mode == MatchMode::whole_clause) {
        std::vector<std::string> texts;
        for (const auto& c : ai) texts.push_back(c.render());
        auto vecs = embedder.embed(texts);
        for (std::size_t i = 0; i < ai.size(); ++i) {
            auto best = source.index().top_k(vecs[i], 1).front();
            out.push_back({ai[i], best.key, std::clamp(best.score, 0.0, 1.0)});
        }
        return out;
    }
    if (!source.has_components()) {
        throw InvalidArgument("source index was built without component embeddings");
    }
    auto comps = SourceClauseIndex::embed_components(ai, embedder);
    for (std::size_t i = 0; i < ai.size(); ++i) {
        double best = -1.0;
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < source.components().size(); ++j) {
            double s = component_similarity(comps[i], source.components()[j]);
            if (s > best) {
                best = s;
                best_j = j;
            }
        }
        out.push_back({ai[i], SourceClauseIndex::key_for(best_j), best});
    }
    return out;
}

inline void require_matches(const std::vector<ClauseMatch>& matches) {
    if (matches.empty()) throw Unevaluable("no clauses to evaluate");
}

inline void require_threshold(double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("threshold must lie in [0, 1]");
}

inline std::size_t adherent_count(const std::vector<ClauseMatch>& matches, double t = 0.7) {
    require_matches(matches);
    require_threshold(t);
    return static_cast<std::size_t>(std::count_if(
        matches.begin(), matches.end(), [t](const ClauseMatch& m) { return m.similarity >= t; }));
}

/// Fraction of clauses whose similarity reaches t.
inline double factscore(const std::vector<ClauseMatch>& matches, double t = 0.7) {
    return static_cast<double>(adherent_count(matches, t)) / static_cast<double>(matches.size());
}

inline double mean_similarity(const std::vector<ClauseMatch>& matches) {
    require_matches(matches);
    double s = 0.0;
    for (const auto& m : matches) s += m.similarity;
    return s / static_cast<double>(matches.size());
}

inline std::vector<std::pair<double, double>> threshold_sweep(const std::vector<ClauseMatch>& matches,
                                                              const std::vector<double>& ts) {
    if (!std::is_sorted(ts.begin(), ts.end())) throw InvalidArgument("thresholds must be ascending");
    std::vector<std::pair<double, double>> out;
    for (double t : ts) out.emplace_back(t, factscore(matches, t));
    return out;
}

struct AdherenceReport {
    std::string question_id;
    Mode mode = Mode::rag;
    std::string model_id;
    double threshold = 0.7;
    MatchMode matching = MatchMode::whole_clause;
    double factscore = 0.0;
    double mean_similarity = 0.0;
    std::size_t adherent_count = 0;
    std::size_t clause_count = 0;
    std::size_t word_count = 0;
};

inline void to_json(nlohmann::json& j, const AdherenceReport& r) {
    j = nlohmann::json{{"question_id", r.question_id},
                       {"mode", to_string(r.mode)},
                       {"model_id", r.model_id},
                       {"threshold", r.threshold},
                       {"matching", to_string(r.matching)},
                       {"factscore", r.factscore},
                       {"mean_similarity", r.mean_similarity},
                       {"adherent_count", r.adherent_count},
                       {"clause_count", r.clause_count},
                       {"word_count", r.word_count}};
}

inline void from_json(const nlohmann::json& j, AdherenceReport& r) {
    j.at("question_id").get_to(r.question_id);
    r.mode = mode_from_string(j.at("mode").get<std::string>());
    j.at("model_id").get_to(r.model_id);
    j.at("threshold").get_to(r.threshold);
    r.matching = match_mode_from_string(j.at("matching").get<std::string>());
    j.at("factscore").get_to(r.factscore);
    j.at("mean_similarity").get_to(r.mean_similarity);
    j.at("adherent_count").get_to(r.adherent_count);
    j.at("clause_count").get_to(r.clause_count);
    j.at("word_count").get_to(r.word_count);
}

struct AdherenceParams {
    double threshold = 0.7;
    MatchMode matching = MatchMode::whole_clause;
    std::string textbook_title;  // also removed as a citation keyword
};

/// Scores an explanation's clauses against the source after stripping citation markers.
/// Throws Unevaluable when the explanation yields no clauses.
inline AdherenceReport evaluate(const Explanation& explanation, const SourceClauseIndex& source,
                                EmbeddingProvider& embedder, const ClauseExtractor& extractor,
                                const AdherenceParams& params = {}) {
    auto text = strip_citations(explanation.text, params.textbook_title);
    auto clauses = extractor.extract(text);
    if (clauses.empty()) {
        throw Unevaluable("explanation " + explanation.question_id + "/" +
                          to_string(explanation.mode) + " has no extractable clauses");
    }
    auto matches = match_clauses(clauses, source, embedder, params.matching);
    AdherenceReport r;
    r.question_id = explanation.question_id;
    r.mode = explanation.mode;
    r.model_id = explanation.model_id;
    r.threshold = params.threshold;
    r.matching = params.matching;
    r.adherent_count = adherent_count(matches, params.threshold);
    r.clause_count = matches.size();
    r.factscore = static_cast<double>(r.adherent_count) / static_cast<double>(r.clause_count);
    r.mean_similarity = mean_similarity(matches);
    r.word_count = tokenize(text).size();
    return r;
}

/// Clause extraction delegated to a generator model. Each sentence is sent separately
/// and answered with lines "subject | predicate | object".
class GeneratorClauseExtractor final : public ClauseExtractor {
public:
    GeneratorClauseExtractor(std::shared_ptr<GeneratorProvider> generator, std::string model_id)
        : generator_(std::move(generator)), model_id_(std::move(model_id)) {}

    static std::string prompt_for(std::string_view sentence) {
        return "List the grammatical clauses of the sentence below, one per line, as "
               "\"subject | predicate | object\". Leave the object empty if there is none. "
               "Output nothing else.\n\nSentence: " +
               std::string(sentence);
    }

    std::vector<Clause> extract(std::string_view text) const override {
        std::vector<Clause> out;
        auto sentences = split_sentences(text);
        for (std::size_t i = 0; i < sentences.size(); ++i) {
            auto reply = generator_->complete({model_id_, prompt_for(join(sentences[i], " ")),
                                               Decoding{0.0, 0.0}});
            std::size_t pos = 0;
            const auto& t = reply.text;
            while (pos <= t.size()) {
                auto nl = t.find('\n', pos);
                std::string line = t.substr(pos, nl == std::string::npos ? nl : nl - pos);
                auto a = line.find('|');
                auto b = a == std::string::npos ? a : line.find('|', a + 1);
                if (b != std::string::npos) {
                    Clause c{trim(line.substr(0, a)), trim(line.substr(a + 1, b - a - 1)),
                             trim(line.substr(b + 1)), i};
                    if (!c.subject.empty() && !c.predicate.empty()) out.push_back(std::move(c));
                }
                if (nl == std::string::npos) break;
                pos = nl + 1;
            }
        }
        return out;
    }

    std::string name() const override { return "generator:" + model_id_; }

private:
    std::shared_ptr<GeneratorProvider> generator_;
    std::string model_id_;
};

}  // namespace coi
