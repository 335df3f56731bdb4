#include <filesystem>
#include <random>

#include <catch_amalgamated.hpp>

#include "coi/question_bank.hpp"

using namespace coi;
namespace fs = std::filesystem;

static const char* alice_block =
    "- Who is Alice? An experienced hiker.\n"
    "- What did Alice do? Explored the Rocky Mountains.\n"
    "- Despite what did Alice decide to explore the Rocky Mountains? Rain.\n"
    "- What did she pack? Gear.\n"
    "- When did she pack? Early in the morning.\n";

// Extractor returning fixed clauses, to test template generation in isolation.
struct FixedExtractor final : ClauseExtractor {
    std::vector<Clause> clauses;
    std::vector<Clause> extract(std::string_view) const override { return clauses; }
    std::string name() const override { return "fixed"; }
};

static std::vector<Chunk> chunks(int n) {
    std::vector<Chunk> out;
    for (int i = 0; i < n; ++i) {
        Chunk c;
        c.id = "doc#" + std::to_string(i);
        c.doc_id = "doc";
        c.text = "Paragraph number " + std::to_string(i) + " talks about topic" + std::to_string(i) + ".";
        out.push_back(c);
    }
    return out;
}

TEST_CASE("extract_qas parses the worked example") {
    ScriptedGenerator gen({{}, ScriptedGenerator::Fallback::fixed, alice_block, 2, {}, "t"});
    auto r = extract_qas("Alice, an experienced hiker, explores the Rocky Mountains despite rain.", gen, "m");
    REQUIRE(r.pairs.size() == 5);
    CHECK(r.pairs[0] == std::pair<std::string, std::string>{"Who is Alice?", "An experienced hiker."});
    CHECK(r.pairs[3] == std::pair<std::string, std::string>{"What did she pack?", "Gear."});
    CHECK(r.skipped == 0);
    CHECK_THROWS_AS(extract_qas("   ", gen, "m"), InvalidArgument);
}

TEST_CASE("parse_qa_lines") {
    CHECK(parse_qa_lines("no dashes here\nnor here").pairs.empty());
    auto r = parse_qa_lines("- What did she pack? Gear.\n- not a question\n  - Why? Because.\nnoise");
    REQUIRE(r.pairs.size() == 2);
    CHECK(r.pairs[0] == std::pair<std::string, std::string>{"What did she pack?", "Gear."});
    CHECK(r.pairs[1] == std::pair<std::string, std::string>{"Why?", "Because."});
    CHECK(r.skipped == 1);

    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> w(1, 6);
    for (int trial = 0; trial < 200; ++trial) {
        std::string q, a;
        for (int i = w(rng); i > 0; --i) q += "word" + std::to_string(rng() % 50) + " ";
        q = trim(q) + "?";
        for (int i = w(rng); i > 0; --i) a += "ans" + std::to_string(rng() % 50) + " ";
        a = trim(a);
        auto p = parse_qa_lines("- " + q + " " + a);
        REQUIRE(p.pairs.size() == 1);
        CHECK(p.pairs[0] == std::pair<std::string, std::string>{q, a});
    }
}

TEST_CASE("build_bank") {
    HashedEmbedder h(128);
    ScriptedGenerator two({{}, ScriptedGenerator::Fallback::fixed,
                           "- What is one? First.\n- What is two? Second.\n", 2, {}, "t"});
    SECTION("no chunks gives an empty bank") {
        auto bank = build_bank({}, two, h, {"java", "m", {}, ""});
        CHECK(bank.empty());
        CHECK(bank.index.empty());
    }
    SECTION("two QAs per chunk over three chunks") {
        BankBuildStats st;
        auto bank = build_bank(chunks(3), two, h, {"java", "m", {}, ""}, &st);
        REQUIRE(bank.questions.size() == 6);
        CHECK(bank.index.size() == 6);
        CHECK(bank.questions[0].id == "java-q0");
        CHECK(bank.questions[5].id == "java-q5");
        CHECK(bank.questions[2].source_chunk_id == "doc#1");
        CHECK(bank.questions[2].tag == "java");
        CHECK(st.chunks == 3);
        for (const auto& q : bank.questions) {
            auto top = bank.index.top_k(h.embed_one(q.question), 6);
            bool found = false;
            for (const auto& hit : top) found |= hit.key == q.id && hit.score == Catch::Approx(1.0);
            CHECK(found);
        }
    }
    SECTION("checkpoint resumes without calling the generator") {
        auto dir = fs::temp_directory_path() / "coi_bank_test";
        fs::remove_all(dir);
        fs::create_directories(dir);
        auto ck = (dir / "ck.jsonl").string();
        auto first = build_bank(chunks(3), two, h, {"java", "m", {}, ck});
        ScriptedGenerator failing({});
        BankBuildStats st;
        auto again = build_bank(chunks(3), failing, h, {"java", "m", {}, ck}, &st);
        CHECK(st.resumed == 3);
        CHECK(failing.requests() == 0);
        CHECK(again.questions.size() == first.questions.size());

        first.save((dir / "bank").string());
        auto loaded = QuestionBank::load((dir / "bank").string());
        CHECK(loaded.questions.size() == 6);
        CHECK(loaded.index.serialize() == first.index.serialize());
        fs::remove_all(dir);
    }
    SECTION("generator failures propagate") {
        ScriptedGenerator failing({});
        CHECK_THROWS_AS(build_bank(chunks(1), failing, h, {"java", "m", {}, ""}), ProviderError);
    }
}

TEST_CASE("template questions") {
    QuestionRecord q{"q", "java", "How do I convert a String to an int in Java?", "", "", 1};
    SECTION("labels from the extractor, deduplicated case-insensitively") {
        FixedExtractor fx;
        fx.clauses = {{"I", "convert", "a String", 0}, {"it", "becomes", "an int", 0},
                      {"A string", "is", "", 1}};
        CHECK(template_questions(q, fx) ==
              std::vector<std::string>{"What is a String?", "What is an int?"});
    }
    SECTION("rule-based extractor on the same question") {
        CHECK(template_questions(q, RuleBasedClauseExtractor{}) ==
              std::vector<std::string>{"What is a String?"});
    }
    SECTION("what-question") {
        QuestionRecord di{"q", "java", "What is dependency injection?", "", "", 1};
        CHECK(template_questions(di, RuleBasedClauseExtractor{}) ==
              std::vector<std::string>{"What is dependency injection?"});
    }
    SECTION("no clauses") {
        QuestionRecord none{"q", "java", "Help!", "", "", 1};
        CHECK(template_questions(none, RuleBasedClauseExtractor{}).empty());
    }
}
