#pragma once

// End-to-end experiment orchestration from configuration to report files.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include "coi/adherence.hpp"
#include "coi/call_cache.hpp"
#include "coi/clauses.hpp"
#include "coi/coi_planner.hpp"
#include "coi/corpus.hpp"
#include "coi/embedding.hpp"
#include "coi/generator.hpp"
#include "coi/json_lines.hpp"
#include "coi/prompting.hpp"
#include "coi/question.hpp"
#include "coi/question_bank.hpp"
#include "coi/stats.hpp"
#include "coi/svg_plot.hpp"

namespace coi {

namespace fs = std::filesystem;

struct CorpusSpec {
    std::string tag;
    std::string path;
    std::string title;
    std::string bank;  // optional prebuilt bank stem
};

struct ModelSpec {
    std::string model_id;
    GeneratorProviderConfig provider;
};

struct ExperimentConfig {
    std::vector<CorpusSpec> corpora;
    std::string questions_path;
    std::vector<Mode> modes{Mode::genai, Mode::rag, Mode::rag_coi};
    std::vector<ModelSpec> models;
    EmbeddingProviderConfig embedder;
    std::optional<ModelSpec> bank_generator;
    ChunkingParams chunking;
    PlannerParams planner;
    std::size_t primary_k = 10;
    AdherenceParams adherence;
    std::string extractor = "rule_based";  // or "generator:<model id>"
    double alpha = 0.05;
    double fdr_q = 0.05;
    std::size_t bootstrap_resamples = 10000;
    std::string cache_dir;
    std::string output_dir = "out";
    std::uint64_t seed = 0;
    bool offline = false;
    bool allow_partial = false;
    std::size_t max_in_flight = 4;

    void validate() const {
        if (modes.empty()) throw InvalidArgument("config lists no modes");
        if (models.empty()) throw InvalidArgument("config lists no models");
        if (corpora.empty()) throw InvalidArgument("config lists no corpora");
        std::set<std::string> tags;
        for (const auto& c : corpora) {
            if (!tags.insert(c.tag).second) throw InvalidArgument("duplicate corpus tag " + c.tag);
        }
        std::set<std::string> ids;
        for (const auto& m : models) {
            if (!ids.insert(m.model_id).second) throw InvalidArgument("duplicate model " + m.model_id);
        }
        bool coi = std::find(modes.begin(), modes.end(), Mode::rag_coi) != modes.end();
        if (coi) {
            for (const auto& c : corpora) {
                if (c.bank.empty() && !bank_generator) {
                    throw InvalidArgument("rag_coi needs a bank for corpus " + c.tag +
                                          " or a [bank_generator] section");
                }
            }
        }
    }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        auto t = trim(cur);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

inline std::string resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return p;
    fs::path path(p);
    return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

inline HttpEndpoint endpoint_from(const boost::property_tree::ptree& s) {
    HttpEndpoint e;
    e.base_url = s.get<std::string>("endpoint", e.base_url);
    e.api_key = HttpEndpoint::key_from_env(s.get<std::string>("api_key_env", "OPENAI_API_KEY"));
    e.timeout = std::chrono::seconds(s.get<long>("timeout_s", 120));
    return e;
}

inline RetryPolicy retry_from(const boost::property_tree::ptree& s) {
    RetryPolicy r;
    r.max_attempts = s.get<int>("max_attempts", r.max_attempts);
    r.initial_backoff = std::chrono::milliseconds(s.get<long>("backoff_ms", 500));
    return r;
}

inline GeneratorProviderConfig generator_from(const boost::property_tree::ptree& s,
                                              const fs::path& base) {
    GeneratorProviderConfig g;
    auto kind = s.get<std::string>("kind", "scripted");
    if (kind == "remote") {
        g.kind = GeneratorProviderConfig::Kind::remote;
    } else if (kind == "scripted") {
        g.kind = GeneratorProviderConfig::Kind::scripted;
    } else {
        throw InvalidArgument("unknown generator kind: " + kind);
    }
    g.endpoint = endpoint_from(s);
    g.retry = retry_from(s);
    if (auto script = s.get<std::string>("script", ""); !script.empty()) {
        g.script.table = ScriptedGenerator::load_table(resolve(base, script));
    }
    g.script.fallback = ScriptedGenerator::fallback_from_string(s.get<std::string>("fallback", "none"));
    g.script.fixed_text = s.get<std::string>("fixed_text", "");
    g.script.sentences_per_block = s.get<std::size_t>("sentences_per_block", 2);
    g.script.filler = split_list(s.get<std::string>("filler", ""), '|');
    return g;
}

}  // namespace detail

/// Reads an INI configuration. Relative paths resolve against the file's directory.
inline ExperimentConfig load_config(const std::string& path) {
    boost::property_tree::ptree pt;
    try {
        boost::property_tree::read_ini(path, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ParseError(e.message(), e.line());
    }
    const fs::path base = fs::absolute(path).parent_path();
    ExperimentConfig cfg;
    using detail::resolve;

    const auto empty = boost::property_tree::ptree();
    const auto& ex = pt.get_child("experiment", empty);
    cfg.questions_path = resolve(base, ex.get<std::string>("questions", ""));
    if (auto modes = ex.get_optional<std::string>("modes")) {
        cfg.modes.clear();
        for (const auto& m : detail::split_list(*modes, ',')) cfg.modes.push_back(mode_from_string(m));
    }
    cfg.output_dir = resolve(base, ex.get<std::string>("output", "out"));
    cfg.cache_dir = resolve(base, ex.get<std::string>("cache", ""));
    cfg.seed = ex.get<std::uint64_t>("seed", 0);
    cfg.offline = ex.get<bool>("offline", false);
    cfg.allow_partial = ex.get<bool>("allow_partial", false);
    cfg.max_in_flight = std::max<std::size_t>(1, ex.get<std::size_t>("max_in_flight", 4));

    const auto& ch = pt.get_child("chunking", empty);
    cfg.chunking.size = ch.get<std::size_t>("size", cfg.chunking.size);
    cfg.chunking.overlap = ch.get<std::size_t>("overlap", cfg.chunking.overlap);
    cfg.chunking.min_tokens = ch.get<std::size_t>("min_tokens", cfg.chunking.min_tokens);

    const auto& pl = pt.get_child("planner", empty);
    cfg.planner.pool_size = pl.get<std::size_t>("pool_size", cfg.planner.pool_size);
    cfg.planner.chunks_per_candidate =
        pl.get<std::size_t>("chunks_per_candidate", cfg.planner.chunks_per_candidate);
    cfg.planner.max_selected = pl.get<std::size_t>("max_selected", cfg.planner.max_selected);
    cfg.planner.min_support = pl.get<double>("min_support", cfg.planner.min_support);
    cfg.primary_k = pl.get<std::size_t>("primary_k", cfg.primary_k);

    const auto& ad = pt.get_child("adherence", empty);
    cfg.adherence.threshold = ad.get<double>("threshold", cfg.adherence.threshold);
    cfg.adherence.matching = match_mode_from_string(ad.get<std::string>("matching", "whole_clause"));
    cfg.extractor = ad.get<std::string>("extractor", cfg.extractor);

    const auto& st = pt.get_child("stats", empty);
    cfg.alpha = st.get<double>("alpha", cfg.alpha);
    cfg.fdr_q = st.get<double>("fdr", cfg.fdr_q);
    cfg.bootstrap_resamples = st.get<std::size_t>("bootstrap", cfg.bootstrap_resamples);

    const auto& em = pt.get_child("embedder", empty);
    auto ekind = em.get<std::string>("kind", "hashed");
    if (ekind == "hashed") {
        cfg.embedder.kind = EmbeddingProviderConfig::Kind::hashed;
    } else if (ekind == "remote") {
        cfg.embedder.kind = EmbeddingProviderConfig::Kind::remote;
    } else {
        throw InvalidArgument("unknown embedder kind: " + ekind);
    }
    cfg.embedder.dims = em.get<std::size_t>("dims", cfg.embedder.dims);
    cfg.embedder.model_id = em.get<std::string>("model", cfg.embedder.model_id);
    cfg.embedder.endpoint = detail::endpoint_from(em);
    cfg.embedder.retry = detail::retry_from(em);

    for (const auto& [section, body] : pt) {
        if (section.rfind("corpus.", 0) == 0) {
            CorpusSpec c;
            c.tag = section.substr(7);
            c.path = resolve(base, body.get<std::string>("path"));
            c.title = body.get<std::string>("title", c.tag);
            c.bank = resolve(base, body.get<std::string>("bank", ""));
            cfg.corpora.push_back(std::move(c));
        } else if (section.rfind("model.", 0) == 0) {
            cfg.models.push_back({section.substr(6), detail::generator_from(body, base)});
        } else if (section == "bank_generator") {
            cfg.bank_generator = ModelSpec{body.get<std::string>("model", "bank-generator"),
                                           detail::generator_from(body, base)};
        }
    }
    cfg.validate();
    return cfg;
}

/// Questions from JSON Lines, ordered by tag then descending views (file order on ties).
/// An empty `tags` set accepts every tag.
inline std::vector<QuestionRecord> load_questions(const std::string& path,
                                                  const std::set<std::string>& tags = {}) {
    std::vector<QuestionRecord> out;
    std::set<std::string> ids;
    for_each_json_line(path, [&](const nlohmann::json& j, std::size_t lineno) {
        QuestionRecord q;
        try {
            q = j.get<QuestionRecord>();
        } catch (const ParseError& e) {
            throw ParseError(e.what(), lineno);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(e.what(), lineno);
        }
        if (q.title.empty()) throw ParseError("empty title", lineno);
        if (!tags.empty() && !tags.contains(q.tag)) {
            throw ParseError("unknown tag '" + q.tag + "'", lineno);
        }
        if (!ids.insert(q.id).second) throw ParseError("duplicate question id '" + q.id + "'", lineno);
        out.push_back(std::move(q));
    });
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.tag != b.tag) return a.tag < b.tag;
        return a.views > b.views;
    });
    return out;
}

/// Per-corpus state shared by every stage.
struct CorpusState {
    CorpusSpec spec;
    Document document;
    std::shared_ptr<ChunkStore> store;          // absent when no retrieval mode runs
    std::shared_ptr<QuestionBank> bank;         // built on first use
    std::shared_ptr<SourceClauseIndex> clauses; // adherence reference
};

/// Providers and corpora built from a config.
class Workspace {
public:
    explicit Workspace(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
        if (!cfg_.cache_dir.empty()) cache_ = std::make_shared<CallCache>(cfg_.cache_dir);
        embedder_ = make_embedder(cfg_.embedder, cache_, cfg_.offline);
        for (const auto& m : cfg_.models) generators_[m.model_id] = wrap(make_generator(m.provider));
        if (cfg_.extractor == "rule_based") {
            extractor_ = std::make_unique<RuleBasedClauseExtractor>();
        } else if (cfg_.extractor.rfind("generator:", 0) == 0) {
            auto model = cfg_.extractor.substr(10);
            auto it = generators_.find(model);
            if (it == generators_.end()) throw InvalidArgument("extractor model not configured: " + model);
            extractor_ = std::make_unique<GeneratorClauseExtractor>(it->second, model);
        } else {
            throw InvalidArgument("unknown extractor: " + cfg_.extractor);
        }
    }

    const ExperimentConfig& config() const noexcept { return cfg_; }
    EmbeddingProvider& embedder() { return *embedder_; }
    const ClauseExtractor& extractor() const { return *extractor_; }
    GeneratorProvider& generator(const std::string& model_id) { return *generators_.at(model_id); }
    std::shared_ptr<CallCache> cache() const { return cache_; }
    std::size_t retrieval_queries() const noexcept { return retrieval_queries_; }

    bool uses(Mode m) const {
        return std::find(cfg_.modes.begin(), cfg_.modes.end(), m) != cfg_.modes.end();
    }

    /// Loads and indexes the corpus for `tag` on first use.
    CorpusState& corpus(const std::string& tag) {
        if (auto it = corpora_.find(tag); it != corpora_.end()) return it->second;
        auto spec = std::find_if(cfg_.corpora.begin(), cfg_.corpora.end(),
                                 [&](const auto& c) { return c.tag == tag; });
        if (spec == cfg_.corpora.end()) throw InvalidArgument("no corpus configured for tag " + tag);
        CorpusState st;
        st.spec = *spec;
        st.document = parse_document(tag, spec->title, read_file(spec->path));
        st.clauses = std::make_shared<SourceClauseIndex>(SourceClauseIndex::from_text(
            st.document.text, *extractor_, *embedder_,
            cfg_.adherence.matching == MatchMode::component_weighted));
        if (uses(Mode::rag) || uses(Mode::rag_coi)) {
            st.store = std::make_shared<ChunkStore>(chunk(st.document, cfg_.chunking), *embedder_);
        }
        return corpora_.emplace(tag, std::move(st)).first->second;
    }

    /// The corpus's question bank, loaded or generated on first use.
    QuestionBank& bank(const std::string& tag) {
        auto& st = corpus(tag);
        if (!st.store) st.store = std::make_shared<ChunkStore>(chunk(st.document, cfg_.chunking), *embedder_);
        if (!st.bank) st.bank = std::make_shared<QuestionBank>(load_or_build_bank(st));
        return *st.bank;
    }

    std::vector<ScoredChunk> retrieve_primary(const QuestionRecord& q) {
        auto& st = corpus(q.tag);
        if (!st.store || st.store->empty()) return {};
        ++retrieval_queries_;
        return retrieve(*st.store, embedder_->embed_one(q.query_text()), cfg_.primary_k);
    }

    IllocutionPlan plan_for(const QuestionRecord& q, const std::vector<ScoredChunk>& primary) {
        auto& b = bank(q.tag);
        auto& st = corpus(q.tag);
        ++retrieval_queries_;
        auto p = plan(q, b, *st.store, *embedder_, *extractor_, cfg_.planner);
        flag_primary_overlap(p, primary);
        return p;
    }

private:
    std::shared_ptr<GeneratorProvider> wrap(std::shared_ptr<GeneratorProvider> g) const {
        if (!cache_) return g;
        return std::make_shared<CachingGenerator>(std::move(g), cache_, cfg_.offline);
    }

    QuestionBank load_or_build_bank(const CorpusState& st) {
        if (!st.spec.bank.empty()) return QuestionBank::load(st.spec.bank);
        if (!cfg_.bank_generator) {
            throw InvalidArgument("no bank configured for corpus " + st.spec.tag +
                                  " and no [bank_generator] section");
        }
        const auto& spec = *cfg_.bank_generator;
        auto gen = wrap(make_generator(spec.provider));
        fs::create_directories(fs::path(cfg_.output_dir) / "banks");
        BankBuildOptions opts;
        opts.tag = st.spec.tag;
        opts.model_id = spec.model_id;
        opts.checkpoint_path =
            (fs::path(cfg_.output_dir) / "banks" / (st.spec.tag + ".checkpoint.jsonl")).string();
        auto bank = build_bank(st.store->chunks(), *gen, *embedder_, opts);
        bank.save((fs::path(cfg_.output_dir) / "banks" / st.spec.tag).string());
        fs::remove(opts.checkpoint_path);
        return bank;
    }

    ExperimentConfig cfg_;
    std::shared_ptr<CallCache> cache_;
    std::unique_ptr<EmbeddingProvider> embedder_;
    std::map<std::string, std::shared_ptr<GeneratorProvider>> generators_;
    std::unique_ptr<ClauseExtractor> extractor_;
    std::map<std::string, CorpusState> corpora_;
    std::size_t retrieval_queries_ = 0;
};

struct ItemFailure {
    std::string question_id;
    Mode mode = Mode::genai;
    std::string model_id;
    std::string stage;  // "generate" or "evaluate"
    std::string error;
};

inline void to_json(nlohmann::json& j, const ItemFailure& f) {
    j = nlohmann::json{{"question_id", f.question_id}, {"mode", to_string(f.mode)},
                       {"model_id", f.model_id},       {"stage", f.stage},
                       {"error", f.error}};
}

struct PlanRecord {
    std::string question_id;
    nlohmann::json plan;
};

inline void to_json(nlohmann::json& j, const PlanRecord& p) { j = p.plan; }

/// Builds prompt bundles for every question and mode. Plans are computed once per
/// question and shared across models.
struct PreparedQuestion {
    QuestionRecord question;
    std::map<Mode, PromptBundle> bundles;
};

inline std::vector<PreparedQuestion> prepare_prompts(Workspace& ws,
                                                     const std::vector<QuestionRecord>& questions,
                                                     std::vector<PlanRecord>* plans = nullptr) {
    std::vector<PreparedQuestion> out;
    for (const auto& q : questions) {
        PreparedQuestion pq{q, {}};
        auto& st = ws.corpus(q.tag);
        if (ws.uses(Mode::genai)) pq.bundles[Mode::genai] = assemble_genai(q);
        if (ws.uses(Mode::rag) || ws.uses(Mode::rag_coi)) {
            auto primary = ws.retrieve_primary(q);
            std::vector<Chunk> chunks;
            for (const auto& sc : primary) chunks.push_back(sc.chunk);
            if (ws.uses(Mode::rag) && !chunks.empty()) {
                pq.bundles[Mode::rag] = assemble_rag(q, st.spec.title, chunks);
            }
            if (ws.uses(Mode::rag_coi)) {
                auto p = ws.plan_for(q, primary);
                if (plans) plans->push_back({q.id, plan_to_json(p)});
                if (!chunks.empty() || !p.empty()) {
                    pq.bundles[Mode::rag_coi] = assemble_rag_coi(q, st.spec.title, chunks, p);
                }
            }
        }
        out.push_back(std::move(pq));
    }
    return out;
}

struct AnswerResult {
    std::vector<Explanation> explanations;
    std::vector<ItemFailure> failures;
};

/// Generates every (question, model, mode) explanation with at most `max_in_flight`
/// concurrent provider calls. Output order is question, model, mode.
inline AnswerResult answer_all(Workspace& ws, const std::vector<PreparedQuestion>& prepared) {
    struct Job {
        const PreparedQuestion* pq;
        const ModelSpec* model;
        Mode mode;
    };
    std::vector<Job> jobs;
    for (const auto& pq : prepared) {
        for (const auto& m : ws.config().models) {
            for (Mode mode : ws.config().modes) jobs.push_back({&pq, &m, mode});
        }
    }
    std::vector<std::optional<Explanation>> results(jobs.size());
    std::vector<std::optional<ItemFailure>> failures(jobs.size());
    auto run = [&](std::size_t i) {
        const auto& job = jobs[i];
        auto it = job.pq->bundles.find(job.mode);
        if (it == job.pq->bundles.end()) {
            failures[i] = ItemFailure{job.pq->question.id, job.mode, job.model->model_id, "generate",
                                      "no prompt could be assembled (no retrieved chunks)"};
            return;
        }
        try {
            results[i] = generate(it->second, ws.generator(job.model->model_id), job.model->model_id,
                                  job.pq->question.id);
        } catch (const Error& e) {
            failures[i] =
                ItemFailure{job.pq->question.id, job.mode, job.model->model_id, "generate", e.what()};
        }
    };
    const std::size_t cap = ws.config().max_in_flight;
    for (std::size_t b = 0; b < jobs.size(); b += cap) {
        std::vector<std::future<void>> inflight;
        for (std::size_t i = b; i < std::min(jobs.size(), b + cap); ++i) {
            inflight.push_back(std::async(std::launch::async, run, i));
        }
        for (auto& f : inflight) f.get();
    }
    AnswerResult out;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (results[i]) out.explanations.push_back(std::move(*results[i]));
        if (failures[i]) out.failures.push_back(std::move(*failures[i]));
    }
    return out;
}

struct EvaluationResult {
    std::vector<AdherenceReport> reports;
    std::vector<ItemFailure> unevaluable;
};

inline EvaluationResult evaluate_all(Workspace& ws, const std::vector<QuestionRecord>& questions,
                                     const std::vector<Explanation>& explanations) {
    std::map<std::string, std::string> tag_of;
    for (const auto& q : questions) tag_of[q.id] = q.tag;
    EvaluationResult out;
    for (const auto& e : explanations) {
        auto tag = tag_of.find(e.question_id);
        if (tag == tag_of.end()) throw InvalidArgument("explanation for unknown question " + e.question_id);
        auto& st = ws.corpus(tag->second);
        auto params = ws.config().adherence;
        params.textbook_title = st.spec.title;
        try {
            out.reports.push_back(evaluate(e, *st.clauses, ws.embedder(), ws.extractor(), params));
        } catch (const Unevaluable& u) {
            out.unevaluable.push_back({e.question_id, e.mode, e.model_id, "evaluate", u.what()});
        }
    }
    return out;
}

inline const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{"factscore", "mean_similarity", "adherent_count",
                                                "word_count"};
    return names;
}

inline double metric_value(const AdherenceReport& r, const std::string& metric) {
    if (metric == "factscore") return r.factscore;
    if (metric == "mean_similarity") return r.mean_similarity;
    if (metric == "adherent_count") return static_cast<double>(r.adherent_count);
    if (metric == "word_count") return static_cast<double>(r.word_count);
    throw InvalidArgument("unknown metric " + metric);
}

struct Comparison {
    std::string model_id;
    std::string metric;
    std::size_t n = 0;
    bool available = false;
    std::string reason;
    stats::TestResult test;
    double p_bh_adjusted = std::numeric_limits<double>::quiet_NaN();
    bool rejected = false;
};

struct MetricSummary {
    std::string model_id;
    Mode mode = Mode::rag;
    std::string metric;
    std::size_t n = 0;
    double median = 0.0;
    double mean = 0.0;
    std::optional<std::pair<double, double>> ci;
    const Comparison* comparison = nullptr;  // set on rag_coi rows
};

struct Analysis {
    std::vector<Comparison> comparisons;
    std::vector<MetricSummary> summaries;
    double fdr_q = 0.05;
};

inline nlohmann::json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

/// Paired rag_coi-vs-rag comparisons per (model, metric) with one-sided alternative
/// "rag_coi greater", BH-corrected across the whole family, plus per-group summaries.
inline Analysis analyze(const std::vector<AdherenceReport>& reports,
                        const std::vector<std::string>& model_order,
                        const std::vector<Mode>& modes, double alpha, double fdr_q,
                        std::size_t resamples, std::uint64_t seed) {
    Analysis a;
    a.fdr_q = fdr_q;
    // (model, mode) -> question -> report
    std::map<std::pair<std::string, Mode>, std::map<std::string, const AdherenceReport*>> by;
    std::vector<std::string> question_order;
    std::set<std::string> seen_q;
    for (const auto& r : reports) {
        by[{r.model_id, r.mode}][r.question_id] = &r;
        if (seen_q.insert(r.question_id).second) question_order.push_back(r.question_id);
    }
    const bool paired = std::find(modes.begin(), modes.end(), Mode::rag) != modes.end() &&
                        std::find(modes.begin(), modes.end(), Mode::rag_coi) != modes.end();
    if (paired) {
        for (const auto& model : model_order) {
            for (const auto& metric : metric_names()) {
                Comparison c;
                c.model_id = model;
                c.metric = metric;
                std::vector<std::string> labels;
                std::vector<double> coi, rag;
                const auto& coi_map = by[{model, Mode::rag_coi}];
                const auto& rag_map = by[{model, Mode::rag}];
                for (const auto& qid : question_order) {
                    auto x = coi_map.find(qid);
                    auto y = rag_map.find(qid);
                    if (x == coi_map.end() || y == rag_map.end()) continue;
                    labels.push_back(qid);
                    coi.push_back(metric_value(*x->second, metric));
                    rag.push_back(metric_value(*y->second, metric));
                }
                c.n = labels.size();
                try {
                    stats::PairedSample s(labels, coi, rag);
                    c.test = stats::compare_paired(s, stats::Alternative::greater, alpha);
                    c.available = true;
                } catch (const InvalidArgument& e) {
                    c.reason = e.what();
                }
                a.comparisons.push_back(std::move(c));
            }
        }
        std::vector<double> ps;
        for (const auto& c : a.comparisons)
            if (c.available) ps.push_back(c.test.p_one_sided);
        auto rejected = stats::benjamini_hochberg(ps, fdr_q);
        auto adjusted = stats::bh_adjusted(ps);
        std::size_t k = 0;
        for (auto& c : a.comparisons) {
            if (!c.available) continue;
            c.p_bh_adjusted = adjusted[k];
            c.rejected = rejected[k];
            ++k;
        }
    }
    std::uint64_t stream = 0;
    for (const auto& model : model_order) {
        for (Mode mode : modes) {
            const auto& m = by[{model, mode}];
            for (const auto& metric : metric_names()) {
                ++stream;
                MetricSummary s;
                s.model_id = model;
                s.mode = mode;
                s.metric = metric;
                std::vector<double> v;
                for (const auto& qid : question_order) {
                    if (auto it = m.find(qid); it != m.end()) v.push_back(metric_value(*it->second, metric));
                }
                s.n = v.size();
                if (!v.empty()) {
                    s.median = stats::median(v);
                    s.mean = stats::mean(v);
                }
                if (v.size() >= 2) {
                    s.ci = stats::bootstrap_ci(v, stats::Statistic::mean, resamples, seed + stream);
                }
                if (mode == Mode::rag_coi) {
                    for (const auto& c : a.comparisons) {
                        if (c.model_id == model && c.metric == metric) s.comparison = &c;
                    }
                }
                a.summaries.push_back(s);
            }
        }
    }
    return a;
}

inline nlohmann::json analysis_to_json(const Analysis& a) {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : a.comparisons) {
        nlohmann::json j{{"model_id", c.model_id}, {"metric", c.metric}, {"n", c.n},
                         {"available", c.available}};
        if (c.available) {
            j["test"] = c.test.test_name;
            j["statistic"] = number_or_null(c.test.statistic);
            j["p_one_sided"] = number_or_null(c.test.p_one_sided);
            j["p_two_sided"] = number_or_null(c.test.p_two_sided);
            j["p_bh_adjusted"] = number_or_null(c.p_bh_adjusted);
            j["significant_after_bh"] = c.rejected;
            j["dz"] = number_or_null(c.test.effect_size);
            j["ci95"] = {number_or_null(c.test.ci95.first), number_or_null(c.test.ci95.second)};
            j["exact"] = c.test.exact;
        } else {
            j["reason"] = c.reason;
        }
        comps.push_back(std::move(j));
    }
    nlohmann::json sums = nlohmann::json::array();
    for (const auto& s : a.summaries) {
        nlohmann::json j{{"model_id", s.model_id}, {"mode", to_string(s.mode)}, {"metric", s.metric},
                         {"n", s.n}};
        if (s.n > 0) {
            j["median"] = s.median;
            j["mean"] = s.mean;
        }
        if (s.ci) j["ci95"] = {s.ci->first, s.ci->second};
        sums.push_back(std::move(j));
    }
    return {{"alternative", "rag_coi greater than rag"},
            {"fdr_q", a.fdr_q},
            {"comparisons", comps},
            {"summaries", sums}};
}

namespace detail {

inline std::string fmt(double v) {
    if (!std::isfinite(v)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace detail

/// Per-item rows: one per (question, mode, model) report.
inline std::string aggregate_csv(const std::vector<AdherenceReport>& reports) {
    std::string out = "question_id,mode,model,matching,threshold,factscore,mean_similarity,"
                      "adherent_count,clause_count,word_count\n";
    for (const auto& r : reports) {
        out += detail::csv_field(r.question_id) + "," + to_string(r.mode) + "," +
               detail::csv_field(r.model_id) + "," + to_string(r.matching) + "," +
               detail::fmt(r.threshold) + "," + detail::fmt(r.factscore) + "," +
               detail::fmt(r.mean_similarity) + "," + std::to_string(r.adherent_count) + "," +
               std::to_string(r.clause_count) + "," + std::to_string(r.word_count) + "\n";
    }
    return out;
}

/// Summary rows: (model, mode, metric, median, mean, ci_lo, ci_hi, p_one_sided,
/// p_bh_adjusted, dz, n). CI fields read "NA" when fewer than two values exist; test
/// fields are filled on rag_coi rows only.
inline std::string summary_csv(const Analysis& a) {
    std::string out = "model,mode,metric,median,mean,ci_lo,ci_hi,p_one_sided,p_bh_adjusted,dz,n\n";
    for (const auto& s : a.summaries) {
        const bool has = s.n > 0;
        const auto* c = s.comparison && s.comparison->available ? s.comparison : nullptr;
        out += detail::csv_field(s.model_id) + "," + to_string(s.mode) + "," + s.metric + "," +
               (has ? detail::fmt(s.median) : "NA") + "," + (has ? detail::fmt(s.mean) : "NA") + "," +
               (s.ci ? detail::fmt(s.ci->first) : "NA") + "," +
               (s.ci ? detail::fmt(s.ci->second) : "NA") + "," +
               (c ? detail::fmt(c->test.p_one_sided) : "NA") + "," +
               (c ? detail::fmt(c->p_bh_adjusted) : "NA") + "," +
               (c ? detail::fmt(c->test.effect_size) : "NA") + "," + std::to_string(s.n) + "\n";
    }
    return out;
}

/// Writes one SVG box plot per metric into `dir`; returns the file names.
inline std::vector<std::string> write_plots(const std::vector<AdherenceReport>& reports,
                                            const std::vector<std::string>& model_order,
                                            const std::vector<Mode>& modes, const fs::path& dir) {
    fs::create_directories(dir);
    std::vector<std::string> files;
    for (const auto& metric : metric_names()) {
        std::vector<BoxGroup> groups;
        for (const auto& model : model_order) {
            for (Mode mode : modes) {
                BoxGroup g{model + " / " + to_string(mode), {}};
                for (const auto& r : reports)
                    if (r.model_id == model && r.mode == mode) g.values.push_back(metric_value(r, metric));
                groups.push_back(std::move(g));
            }
        }
        auto name = metric + ".svg";
        write_file((dir / name).string(), box_plot_svg(metric, groups));
        files.push_back("plots/" + name);
    }
    return files;
}

struct ExperimentReport {
    std::vector<QuestionRecord> questions;
    std::vector<Explanation> explanations;
    std::vector<AdherenceReport> reports;
    std::vector<ItemFailure> failures;     // provider failures
    std::vector<ItemFailure> unevaluable;  // explanations without clauses
    Analysis analysis;
    std::size_t retrieval_queries = 0;
    std::map<std::string, std::string> manifest;  // relative path -> sha256

    bool ok(bool allow_partial) const { return failures.empty() || allow_partial; }
};

inline std::map<std::string, std::string> write_manifest(const fs::path& out_dir,
                                                         const std::vector<std::string>& files) {
    std::map<std::string, std::string> manifest;
    for (const auto& f : files) manifest[f] = sha256_hex(read_file((out_dir / f).string()));
    nlohmann::json j = manifest;
    write_file((out_dir / "manifest.json").string(), j.dump(2) + "\n");
    return manifest;
}

/// Runs every stage and writes all artifacts under `cfg.output_dir`.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    std::set<std::string> tags;
    for (const auto& c : cfg.corpora) tags.insert(c.tag);
    ExperimentReport rep;
    rep.questions = load_questions(cfg.questions_path, tags);

    Workspace ws(cfg);
    std::vector<PlanRecord> plans;
    auto prepared = prepare_prompts(ws, rep.questions, &plans);
    auto answers = answer_all(ws, prepared);
    rep.explanations = std::move(answers.explanations);
    rep.failures = std::move(answers.failures);
    auto evaluated = evaluate_all(ws, rep.questions, rep.explanations);
    rep.reports = std::move(evaluated.reports);
    rep.unevaluable = std::move(evaluated.unevaluable);

    std::vector<std::string> model_order;
    for (const auto& m : cfg.models) model_order.push_back(m.model_id);
    rep.analysis = analyze(rep.reports, model_order, cfg.modes, cfg.alpha, cfg.fdr_q,
                           cfg.bootstrap_resamples, cfg.seed);
    rep.retrieval_queries = ws.retrieval_queries();

    const fs::path out(cfg.output_dir);
    fs::create_directories(out);
    write_json_lines((out / "explanations.jsonl").string(), rep.explanations);
    write_json_lines((out / "plans.jsonl").string(), plans);
    write_json_lines((out / "adherence.jsonl").string(), rep.reports);
    std::vector<ItemFailure> all_failures(rep.failures);
    all_failures.insert(all_failures.end(), rep.unevaluable.begin(), rep.unevaluable.end());
    write_json_lines((out / "failures.jsonl").string(), all_failures);
    write_file((out / "aggregate.csv").string(), aggregate_csv(rep.reports));
    write_file((out / "summary.csv").string(), summary_csv(rep.analysis));
    write_file((out / "analysis.json").string(), analysis_to_json(rep.analysis).dump(2) + "\n");
    std::vector<std::string> files{"explanations.jsonl", "plans.jsonl",  "adherence.jsonl",
                                   "failures.jsonl",     "aggregate.csv", "summary.csv",
                                   "analysis.json"};
    for (auto& f : write_plots(rep.reports, model_order, cfg.modes, out / "plots")) files.push_back(f);
    rep.manifest = write_manifest(out, files);
    return rep;
}

}  // namespace coi
