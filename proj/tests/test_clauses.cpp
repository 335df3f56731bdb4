#include <catch_amalgamated.hpp>

#include "coi/clauses.hpp"

using namespace coi;

static const RuleBasedClauseExtractor extractor;

TEST_CASE("simple transitive sentence") {
    auto cs = extractor.extract("Alice explores the Rocky Mountains.");
    REQUIRE(cs.size() == 1);
    CHECK(cs[0] == Clause{"Alice", "explores", "the Rocky Mountains", 0});
    CHECK(cs[0].render() == "Alice explores the Rocky Mountains");
}

TEST_CASE("sentences without a verb yield nothing") {
    CHECK(extractor.extract("Yes.").empty());
    CHECK(extractor.extract("").empty());
    CHECK(extractor.extract("   ").empty());
}

TEST_CASE("sentence indices follow sentence order") {
    auto cs = extractor.extract("She packs her gear. She is tired.");
    REQUIRE(cs.size() == 2);
    CHECK(cs[0] == Clause{"She", "packs", "her gear", 0});
    CHECK(cs[1].subject == "She");
    CHECK(cs[1].predicate.rfind("is", 0) == 0);
    CHECK(cs[1].sentence_index == 1);
}

TEST_CASE("auxiliary verb groups stay together") {
    auto cs = extractor.extract("The compiler has already checked the type of each variable.");
    REQUIRE(cs.size() == 1);
    CHECK(cs[0].subject == "The compiler");
    CHECK(cs[0].predicate == "has already checked");
    CHECK(cs[0].object == "the type of each variable");
}

TEST_CASE("coordinated clauses are split") {
    auto cs = extractor.extract("A list holds items, and a tuple stores values; the set removes duplicates.");
    REQUIRE(cs.size() == 3);
    CHECK(cs[0].subject == "A list");
    CHECK(cs[1].subject == "a tuple");
    CHECK(cs[2].predicate == "removes");
    CHECK(cs[2].object == "duplicates");
}

TEST_CASE("intransitive clause has an empty object") {
    auto cs = extractor.extract("The program stopped.");
    REQUIRE(cs.size() == 1);
    CHECK(cs[0].object.empty());
    CHECK(cs[0].render() == "The program stopped");
}

TEST_CASE("sentence splitting") {
    auto s = split_sentences("One two. Three four!\n\nFive six\n\nSeven? e.g. eight.");
    REQUIRE(s.size() == 5);
    CHECK(s[0] == std::vector<std::string>{"One", "two."});
    CHECK(s[2] == std::vector<std::string>{"Five", "six"});
    CHECK(s[3] == std::vector<std::string>{"Seven?"});
    CHECK(s[4] == std::vector<std::string>{"e.g.", "eight."});
}

TEST_CASE("clause JSON round trip") {
    Clause c{"a", "b", "c", 4};
    nlohmann::json j = c;
    CHECK(j.get<Clause>() == c);
}
