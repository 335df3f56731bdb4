#include <random>

#include <catch_amalgamated.hpp>

#include "coi/adherence.hpp"

using namespace coi;

static std::vector<ClauseMatch> with_sims(std::vector<double> sims) {
    std::vector<ClauseMatch> out;
    for (double s : sims) out.push_back({Clause{"s", "p", "", 0}, "c00000000", s});
    return out;
}

TEST_CASE("metric examples") {
    CHECK(factscore(with_sims({0.9, 0.5}), 0.7) == 0.5);
    CHECK(mean_similarity(with_sims({0.8, 0.6})) == Catch::Approx(0.7));
    CHECK(adherent_count(with_sims({0.9, 0.71, 0.69}), 0.7) == 2);
    CHECK(factscore(with_sims({0.7}), 0.7) == 1.0);  // threshold is inclusive

    auto sweep = threshold_sweep(with_sims({0.65, 0.75}), {0.6, 0.7, 0.8});
    REQUIRE(sweep.size() == 3);
    CHECK(sweep[0].second == 1.0);
    CHECK(sweep[1].second == 0.5);
    CHECK(sweep[2].second == 0.0);

    CHECK_THROWS_AS(factscore({}, 0.7), Unevaluable);
    CHECK_THROWS_AS(mean_similarity({}), Unevaluable);
    CHECK_THROWS_AS(factscore(with_sims({0.5}), 1.5), InvalidArgument);
    CHECK_THROWS_AS(threshold_sweep(with_sims({0.5}), {0.8, 0.2}), InvalidArgument);
}

TEST_CASE("metric invariants on random similarity sets") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> ts;
    for (int i = 0; i <= 20; ++i) ts.push_back(i / 20.0);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> sims(1 + rng() % 30);
        for (auto& s : sims) s = u(rng);
        auto m = with_sims(sims);
        auto sweep = threshold_sweep(m, ts);
        for (std::size_t i = 1; i < sweep.size(); ++i) CHECK(sweep[i].second <= sweep[i - 1].second);
        CHECK(sweep.front().second == 1.0);
        double f = factscore(m, 0.7);
        CHECK(f * static_cast<double>(m.size()) == Catch::Approx(static_cast<double>(adherent_count(m, 0.7))));
        CHECK(mean_similarity(m) >= 0.0);
        CHECK(mean_similarity(m) <= 1.0);
    }
}

TEST_CASE("whole-clause matching is the brute-force maximum") {
    HashedEmbedder h(64);
    const std::vector<std::string> words{"alpha", "beta", "gamma", "delta", "stores", "reads",
                                         "lists", "maps", "keys", "values", "objects", "heap"};
    std::mt19937_64 rng(5);
    auto word = [&] { return words[rng() % words.size()]; };
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Clause> src, ai;
        for (std::size_t i = 0, n = 1 + rng() % 8; i < n; ++i) src.push_back({word(), word(), word(), i});
        for (std::size_t i = 0, n = 1 + rng() % 5; i < n; ++i) ai.push_back({word(), word(), rng() % 2 ? word() : "", i});
        SourceClauseIndex index(src, h);
        auto matches = match_clauses(ai, index, h);
        REQUIRE(matches.size() == ai.size());
        for (std::size_t i = 0; i < ai.size(); ++i) {
            double best = 0.0;
            auto v = h.embed_one(ai[i].render());
            for (const auto& s : src) best = std::max(best, similarity01(v, h.embed_one(s.render())));
            CHECK(matches[i].similarity == Catch::Approx(best).margin(1e-12));
        }
    }
}

TEST_CASE("component matching") {
    HashedEmbedder h(4096);
    SourceClauseIndex index({{"the compiler", "checks", "types", 0}}, h);
    auto disjoint_object = match_clauses({{"the compiler", "checks", "zebras", 0}}, index, h,
                                         MatchMode::component_weighted);
    CHECK(disjoint_object[0].similarity == Catch::Approx(2.0 / 3.0));
    auto no_object = match_clauses({{"the compiler", "checks", "", 0}}, index, h,
                                   MatchMode::component_weighted);
    CHECK(no_object[0].similarity == Catch::Approx(2.0 / 3.0));
    auto same = match_clauses({{"the compiler", "checks", "types", 0}}, index, h,
                              MatchMode::component_weighted);
    CHECK(same[0].similarity == Catch::Approx(1.0));

    SourceClauseIndex bare({{"a", "b", "", 0}}, h, false);
    CHECK_THROWS_AS(match_clauses({{"a", "b", "", 0}}, bare, h, MatchMode::component_weighted),
                    InvalidArgument);
    CHECK_THROWS_AS(match_clauses({{"a", "b", "", 0}}, SourceClauseIndex({}, h), h), InvalidArgument);
}

TEST_CASE("evaluate on verbatim and disjoint explanations") {
    HashedEmbedder h(512);
    RuleBasedClauseExtractor rb;
    const std::string source =
        "The compiler checks every type. A variable stores one value. Methods return results.";
    auto index = SourceClauseIndex::from_text(source, rb, h);
    REQUIRE(index.clauses().size() == 3);

    Explanation copy{"q1", Mode::rag, "m", source + " [p. 4]", {0.5, 0.0}, ""};
    auto r = evaluate(copy, index, h, rb);
    CHECK(r.factscore == 1.0);
    CHECK(r.mean_similarity == Catch::Approx(1.0));
    CHECK(r.clause_count == 3);
    CHECK(r.adherent_count == 3);
    CHECK(r.word_count == 13);

    Explanation other{"q1", Mode::genai, "m", "Zebras paint bright murals. Penguins admire lanterns.",
                      {0.5, 0.0}, ""};
    auto d = evaluate(other, index, h, rb);
    CHECK(d.factscore == 0.0);
    CHECK(d.adherent_count == 0);
    CHECK(d.factscore * d.clause_count == d.adherent_count);

    Explanation empty{"q1", Mode::genai, "m", "Yes. [p. 3]", {0.5, 0.0}, ""};
    CHECK_THROWS_AS(evaluate(empty, index, h, rb), Unevaluable);

    nlohmann::json j = r;
    CHECK(j.get<AdherenceReport>().factscore == r.factscore);
    CHECK(j["matching"] == "whole_clause");
}

TEST_CASE("generator-backed clause extraction") {
    auto gen = std::make_shared<ScriptedGenerator>(ScriptedGenerator::Options{
        {}, ScriptedGenerator::Fallback::fixed, "A | b | c\nnot a clause\n d | e | \n| x | y", 2, {}, "t"});
    GeneratorClauseExtractor ex(gen, "m");
    auto cs = ex.extract("One sentence here. Another one.");
    REQUIRE(cs.size() == 4);
    CHECK(cs[0] == Clause{"A", "b", "c", 0});
    CHECK(cs[1] == Clause{"d", "e", "", 0});
    CHECK(cs[2].sentence_index == 1);
    CHECK(gen->requests() == 2);
    CHECK(ex.name() == "generator:m");
}
