#include <filesystem>

#include <catch_amalgamated.hpp>

#include "coi/experiment.hpp"

using namespace coi;
namespace fs = std::filesystem;

static const std::string golden = COI_FIXTURES "/golden";

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name, const std::string& content) const {
        auto p = (path / name).string();
        write_file(p, content);
        return p;
    }
};

static ExperimentConfig golden_config(const TempDir& t) {
    auto cfg = load_config(golden + "/experiment.ini");
    cfg.output_dir = (t.path / "out").string();
    cfg.cache_dir = (t.path / "cache").string();
    return cfg;
}

static std::string qline(const std::string& id, const std::string& tag, const std::string& title,
                         int views = 0) {
    return nlohmann::json{{"id", id}, {"tag", tag}, {"title", title}, {"body", ""},
                          {"accepted_answer", ""}, {"views", views}}
               .dump() +
           "\n";
}

static std::size_t line_count(const std::string& path) {
    auto s = read_file(path);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

TEST_CASE("golden config loads") {
    auto cfg = load_config(golden + "/experiment.ini");
    CHECK(cfg.modes == std::vector<Mode>{Mode::genai, Mode::rag, Mode::rag_coi});
    REQUIRE(cfg.models.size() == 2);
    CHECK(cfg.models[0].model_id == "echo-small");  // file order
    CHECK(cfg.chunking.size == 150);
    CHECK(cfg.chunking.overlap == 75);
    CHECK(cfg.planner.pool_size == 25);
    CHECK(cfg.primary_k == 3);
    CHECK(cfg.seed == 7);
    CHECK(cfg.bootstrap_resamples == 2000);
    REQUIRE(cfg.corpora.size() == 2);
    CHECK(fs::path(cfg.corpora[0].path).is_absolute());
    CHECK(fs::exists(cfg.questions_path));
    CHECK(cfg.bank_generator.has_value());
}

TEST_CASE("config errors") {
    TempDir t("coi_cfg_test");
    CHECK_THROWS(load_config((t.path / "missing.ini").string()));
    auto no_models = t.file("a.ini", "[experiment]\nquestions = q.jsonl\n[corpus.java]\npath = j.txt\ntitle = J\n");
    CHECK_THROWS_AS(load_config(no_models), InvalidArgument);
    auto bad_mode = t.file("b.ini",
                           "[experiment]\nquestions = q.jsonl\nmodes = genai, magic\n"
                           "[corpus.java]\npath = j.txt\ntitle = J\n[model.m]\nkind = scripted\n");
    CHECK_THROWS(load_config(bad_mode));
    auto no_bank = t.file("c.ini",
                          "[experiment]\nquestions = q.jsonl\nmodes = rag_coi\n"
                          "[corpus.java]\npath = j.txt\ntitle = J\n[model.m]\nkind = scripted\n");
    CHECK_THROWS_AS(load_config(no_bank), InvalidArgument);
}

TEST_CASE("question loading") {
    TempDir t("coi_questions_test");
    CHECK(load_questions(t.file("empty.jsonl", "")).empty());

    auto ok = t.file("ok.jsonl",
                     qline("a", "python", "A?", 5) + qline("b", "java", "B?", 1) + "\n" +
                         qline("c", "java", "C?", 9));
    auto qs = load_questions(ok, {"java", "python"});
    REQUIRE(qs.size() == 3);
    CHECK(qs[0].id == "c");
    CHECK(qs[1].id == "b");
    CHECK(qs[2].id == "a");

    auto expect_line = [&](const std::string& content, const std::string& needle) {
        auto p = t.file("bad.jsonl", content);
        try {
            load_questions(p, {"java"});
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    const std::string good = qline("a", "java", "A?");
    expect_line(good + good, "line 2");
    expect_line(good + "{\"id\":\"b\",\"tag\":\"java\",\"title\":\"B?\"}\n", "line 2");
    expect_line(qline("b", "rust", "B?"), "line 1");
    expect_line(good + "{not json\n", "line 2");
    expect_line(qline("b", "java", ""), "line 1");
}

TEST_CASE("genai-only run issues no retrieval calls") {
    TempDir t("coi_genai_only");
    auto cfg = golden_config(t);
    cfg.modes = {Mode::genai};
    auto rep = run_experiment(cfg);
    CHECK(rep.retrieval_queries == 0);
    CHECK(rep.explanations.size() == 12);
    CHECK(rep.failures.empty());
    CHECK(rep.analysis.comparisons.empty());
    CHECK(!fs::exists(t.path / "out" / "banks"));
}

TEST_CASE("an empty bank makes rag_coi identical to rag") {
    TempDir t("coi_empty_bank");
    auto cfg = golden_config(t);
    cfg.bank_generator->provider.script.fallback = ScriptedGenerator::Fallback::fixed;
    cfg.bank_generator->provider.script.fixed_text = "No questions here.";
    auto rep = run_experiment(cfg);
    REQUIRE(rep.failures.empty());
    std::map<std::tuple<std::string, std::string, Mode>, std::string> text;
    for (const auto& e : rep.explanations) text[{e.question_id, e.model_id, e.mode}] = e.text;
    for (const auto& q : rep.questions) {
        for (const auto& m : cfg.models) {
            CHECK(text.at({q.id, m.model_id, Mode::rag_coi}) == text.at({q.id, m.model_id, Mode::rag}));
        }
    }
    for (const auto& line : detail::split_list(read_file((t.path / "out" / "plans.jsonl").string()), '\n')) {
        CHECK(nlohmann::json::parse(line)["selected"].empty());
    }
}

TEST_CASE("a single question gives NA intervals and untestable comparisons") {
    TempDir t("coi_single_question");
    auto cfg = golden_config(t);
    cfg.questions_path = t.file("q.jsonl", qline("only", "java", "What does the compiler check?", 3));
    auto rep = run_experiment(cfg);
    REQUIRE(rep.failures.empty());
    for (const auto& s : rep.analysis.summaries) CHECK(!s.ci);
    for (const auto& c : rep.analysis.comparisons) CHECK(!c.available);
    auto summary = read_file((t.path / "out" / "summary.csv").string());
    CHECK(summary.rfind("model,mode,metric,median,mean,ci_lo,ci_hi,p_one_sided,p_bh_adjusted,dz,n\n", 0) == 0);
    CHECK(summary.find(",NA,NA,") != std::string::npos);
    auto analysis = nlohmann::json::parse(read_file((t.path / "out" / "analysis.json").string()));
    CHECK(analysis.is_object());
}

TEST_CASE("provider failures are recorded per item") {
    TempDir t("coi_failures");
    auto cfg = golden_config(t);
    cfg.modes = {Mode::genai, Mode::rag};
    cfg.models[1].provider.script.fallback = ScriptedGenerator::Fallback::none;
    auto rep = run_experiment(cfg);
    CHECK(rep.failures.size() == 12);  // 6 questions x 2 modes for the failing model
    CHECK(rep.explanations.size() == 12);
    CHECK(!rep.ok(false));
    CHECK(rep.ok(true));
    for (const auto& f : rep.failures) {
        CHECK(f.model_id == cfg.models[1].model_id);
        CHECK(f.stage == "generate");
    }
    CHECK(line_count((t.path / "out" / "failures.jsonl").string()) == 12 + rep.unevaluable.size());
    auto manifest = nlohmann::json::parse(read_file((t.path / "out" / "manifest.json").string()));
    CHECK(manifest.contains("summary.csv"));
    CHECK(manifest["summary.csv"] == sha256_hex(read_file((t.path / "out" / "summary.csv").string())));
}
