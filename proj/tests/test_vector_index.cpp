#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include <catch_amalgamated.hpp>

#include "coi/vector_index.hpp"

using namespace coi;
using Catch::Approx;

static EmbeddingVector random_unit(std::mt19937_64& rng, std::size_t dims) {
    std::normal_distribution<double> g;
    std::vector<double> v(dims);
    for (auto& x : v) x = g(rng);
    return EmbeddingVector(v).normalized();
}

TEST_CASE("hashed embeddings") {
    HashedEmbedder h(256);
    SECTION("one distinct token has unit mass in a single bucket") {
        auto v = h.embed_one("abc abc");
        int nonzero = 0;
        for (double x : v.values()) {
            if (x != 0.0) {
                ++nonzero;
                CHECK(x == Approx(1.0));
            }
        }
        CHECK(nonzero == 1);
    }
    SECTION("deterministic and self-similar") {
        CHECK(h.embed_one("x") == h.embed_one("x"));
        auto v = h.embed_one("cat dog");
        CHECK(cosine(v, v) == Approx(1.0));
        CHECK(v.norm() == Approx(1.0).margin(1e-9));
    }
    SECTION("cat dog vs cat") {
        REQUIRE(h.bucket("cat") != h.bucket("dog"));
        CHECK(cosine(h.embed_one("cat dog"), h.embed_one("cat")) == Approx(1.0 / std::sqrt(2.0)));
    }
    SECTION("case and surrounding punctuation do not matter") {
        CHECK(h.embed_one("The Heap.") == h.embed_one("the heap"));
    }
    SECTION("empty input is rejected") {
        CHECK_THROWS_AS(h.embed_one(""), InvalidArgument);
        CHECK_THROWS_AS(h.embed_one("  \n"), InvalidArgument);
        CHECK_THROWS_AS(HashedEmbedder(0), InvalidArgument);
    }
}

TEST_CASE("cosine") {
    EmbeddingVector a({1.0, 0.0, 0.0});
    EmbeddingVector b({0.0, 1.0, 0.0});
    CHECK(cosine(a, a) == 1.0);
    CHECK(cosine(a, b) == 0.0);
    CHECK_THROWS_AS(cosine(a, EmbeddingVector({1.0, 0.0})), InvalidArgument);
    CHECK(similarity01(a, EmbeddingVector({-1.0, 0.0, 0.0})) == 0.0);
    CHECK_THROWS_AS(EmbeddingVector({0.0, 0.0}).normalized(), InvalidArgument);
    CHECK_THROWS_AS(EmbeddingVector({NAN}), InvalidArgument);

    std::mt19937_64 rng(5);
    for (int i = 0; i < 100; ++i) {
        auto x = random_unit(rng, 16), y = random_unit(rng, 16);
        CHECK(std::abs(cosine(x, y) - cosine(y, x)) <= 1e-12);
    }
}

TEST_CASE("adding a shared fresh token never lowers hashed cosine") {
    // Holds for token sets (each token at most once) when the new token lands in a
    // bucket neither text uses yet.
    HashedEmbedder h(1 << 16);
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> vocab(0, 400), len(1, 12);
    int checked = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        std::set<int> a, b;
        for (int i = len(rng); i > 0; --i) a.insert(vocab(rng));
        for (int i = len(rng); i > 0; --i) b.insert(vocab(rng));
        std::string extra = "fresh" + std::to_string(trial);
        std::set<std::size_t> buckets;
        bool collision = false;
        std::string ta, tb;
        for (int t : a) ta += "t" + std::to_string(t) + " ";
        for (int t : b) tb += "t" + std::to_string(t) + " ";
        for (const auto& tok : tokenize(ta + tb)) buckets.insert(h.bucket(tok));
        if (buckets.contains(h.bucket(extra))) collision = true;
        std::set<std::string> distinct;
        for (const auto& tok : tokenize(ta + tb)) distinct.insert(tok);
        if (buckets.size() != distinct.size()) collision = true;
        if (collision) continue;
        double before = cosine(h.embed_one(ta), h.embed_one(tb));
        double after = cosine(h.embed_one(ta + extra), h.embed_one(tb + extra));
        CHECK(after >= before - 1e-12);
        ++checked;
    }
    CHECK(checked > 1900);
}

TEST_CASE("top_k matches a brute-force scan") {
    std::mt19937_64 rng(42);
    for (std::size_t k : {1u, 5u, 10u, 600u}) {
        for (int trial = 0; trial < 10; ++trial) {
            VectorIndex idx;
            std::vector<std::pair<std::string, EmbeddingVector>> all;
            for (int i = 0; i < 500; ++i) {
                auto v = random_unit(rng, 64);
                auto key = "k" + std::to_string(i);
                idx.add(key, v);
                all.emplace_back(key, v);
            }
            auto q = random_unit(rng, 64);
            std::vector<ScoredKey> brute;
            for (auto& [key, v] : all) brute.push_back({key, cosine(q, v)});
            std::sort(brute.begin(), brute.end(), ranks_before);
            brute.resize(std::min<std::size_t>(k, brute.size()));
            CHECK(idx.top_k(q, k) == brute);
        }
    }
}

TEST_CASE("top_k contract") {
    VectorIndex idx;
    CHECK_THROWS_AS(idx.top_k(EmbeddingVector({1.0}), 1), InvalidArgument);
    idx.add("b", EmbeddingVector({1.0, 0.0}));
    idx.add("a", EmbeddingVector({1.0, 0.0}));
    idx.add("c", EmbeddingVector({0.0, 1.0}), {{"note", "x"}});
    CHECK_THROWS_AS(idx.top_k(EmbeddingVector({1.0, 0.0}), 0), InvalidArgument);
    CHECK_THROWS_AS(idx.add("a", EmbeddingVector({0.0, 1.0})), InvalidArgument);
    CHECK_THROWS_AS(idx.add("d", EmbeddingVector({0.0, 1.0, 0.0})), InvalidArgument);

    auto top = idx.top_k(EmbeddingVector({1.0, 0.0}), 1);
    REQUIRE(top.size() == 1);
    CHECK(top[0] == ScoredKey{"a", 1.0});  // tie broken by key
    CHECK(idx.top_k(EmbeddingVector({1.0, 0.0}), 10).size() == 3);

    auto path = std::filesystem::temp_directory_path() / "coi_index_roundtrip.jsonl";
    idx.save(path.string());
    auto loaded = VectorIndex::load(path.string());
    CHECK(loaded.serialize() == idx.serialize());
    CHECK(loaded.at("c").payload["note"] == "x");
    std::filesystem::remove(path);
}
