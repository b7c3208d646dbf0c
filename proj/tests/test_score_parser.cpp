#include <doctest.h>

#include <json.hpp>

#include "helpers.hpp"
#include "refscore/llm_client.hpp"
#include "refscore/prompts.hpp"
#include "refscore/score_parser.hpp"

using namespace refscore;

namespace {

const RuleSet& rules() {
    static RuleSet set = RuleSet::built_in();
    return set;
}

// Asserts a report parses to a valued score of the given kind.
void check_value(const std::string& report, double expected, ScoreKind kind) {
    CAPTURE(report);
    auto parsed = extract_score(report, rules());
    REQUIRE(parsed.has_value());
    REQUIRE(parsed->value.has_value());
    CHECK(*parsed->value == doctest::Approx(expected).epsilon(1e-12));
    CHECK(parsed->kind == kind);
}

void check_missing(const std::string& report) {
    CAPTURE(report);
    auto parsed = extract_score(report, rules());
    REQUIRE(parsed.has_value());
    CHECK(parsed->kind == ScoreKind::Missing);
    CHECK_FALSE(parsed->value.has_value());
}

void check_unparseable(const std::string& report) {
    CAPTURE(report);
    CHECK_FALSE(extract_score(report, rules()).has_value());
}

}  // namespace

TEST_CASE("overall score surface forms") {
    check_value("{\"Overall Score**\": \"3*\"}", 3.0, ScoreKind::Overall);
    check_value("Overall score: 3*.", 3.0, ScoreKind::Overall);
    check_value("Overall rating: 4*", 4.0, ScoreKind::Overall);
    check_value("The overall assessment: 2*.", 2.0, ScoreKind::Overall);
    check_value("Overall: 3*", 3.0, ScoreKind::Overall);
    check_value("Thus, this article is assigned a score of 3*.", 3.0,
                ScoreKind::Overall);
    check_value("The work is awarded 2 stars overall.", 2.0, ScoreKind::Overall);
    check_value("It merits a rating of 4*.", 4.0, ScoreKind::Overall);
    check_value("Score: 3", 3.0, ScoreKind::Overall);
    check_value("score = 2", 2.0, ScoreKind::Overall);
    check_value("This is a 3-star contribution.", 3.0, ScoreKind::Overall);
    check_value("I consider it a 4 star piece of work.", 4.0, ScoreKind::Overall);
}

TEST_CASE("sub-score triples average with half-up rounding") {
    check_value(
        "Originality: 4*. Significance: 4*. Rigour: 3*.", 3.667,
        ScoreKind::SubscoreAverage);
    check_value(
        "Originality: 3 stars. Significance: 3 stars. Rigour: 3 stars.", 3.0,
        ScoreKind::SubscoreAverage);
    // American spelling of rigour is accepted.
    check_value("Originality: 2*. Significance: 3*. Rigor: 3*.", 2.667,
                ScoreKind::SubscoreAverage);
    check_value(
        "{\"Originality\": \"4*\", \"Significance\": \"3*\", \"Rigour\": \"3*\"}",
        3.333, ScoreKind::SubscoreAverage);
}

TEST_CASE("score ranges resolve to midpoints") {
    check_value("I would place this at 3* to 4*.", 3.5, ScoreKind::RangeMidpoint);
    check_value("The quality lies between 2* and 4*.", 3.0, ScoreKind::RangeMidpoint);
    check_value("Somewhere between 3* and 4*, leaning high.", 3.5,
                ScoreKind::RangeMidpoint);
    check_value("A 2* to 3* paper.", 2.5, ScoreKind::RangeMidpoint);
}

TEST_CASE("originality and significance alone average to two-way mean") {
    check_value(
        "Originality: 4*. Significance: 3*. Rigour cannot be judged from the "
        "material provided.",
        3.5, ScoreKind::OrigSigAverage);
    check_value(
        "Originality: 2*. Significance: 2*. Rigour cannot be judged from the "
        "material provided.",
        2.0, ScoreKind::OrigSigAverage);
}

TEST_CASE("refusals are missing, not unparseable") {
    check_missing(
        "There is insufficient information to make a judgement about the "
        "quality of this work.");
    check_missing(
        "It is impossible to evaluate an article from this input alone, so no "
        "score is given.");
    check_missing(
        "I am unable to make a judgement on originality, significance or "
        "rigour from the material provided.");
    check_missing("I cannot assess this work from a title alone.");
    check_missing("No score can be given for this submission.");
}

TEST_CASE("out-of-scale and malformed values are never repaired") {
    check_unparseable("Overall score: 5*.");
    check_unparseable("Overall score: 0*.");
    check_unparseable("I would place this at 2* to 1*.");
    check_unparseable("The article is interesting but no rating appears here.");
    check_unparseable("Ранняя оценка отсутствует.");
}

TEST_CASE("priority: an explicit overall beats co-occurring sub-scores") {
    auto parsed = extract_score(
        "Originality: 4*. Significance: 4*. Rigour: 4*. Overall score: 2*.",
        rules());
    REQUIRE(parsed.has_value());
    CHECK(parsed->kind == ScoreKind::Overall);
    CHECK(*parsed->value == 2.0);
}

TEST_CASE("priority: a sub-score triple beats a range mention") {
    auto parsed = extract_score(
        "Originality: 3*. Significance: 3*. Rigour: 4*. Arguably between 2* "
        "and 4* overall depending on taste.",
        rules());
    REQUIRE(parsed.has_value());
    CHECK(parsed->kind == ScoreKind::SubscoreAverage);
    CHECK(*parsed->value == doctest::Approx(3.333));
}

TEST_CASE("priority: first match wins even when its value is rejected") {
    // The overall rule matches first with an out-of-scale value; the parser
    // must not fall through to the in-scale range further on.
    check_unparseable("Overall score: 5*. Realistically between 3* and 4*.");
}

TEST_CASE("an empty report is an analysis error") {
    CHECK_THROWS_AS(extract_score("", rules()), Error);
    try {
        extract_score("   \n  ", rules());
        FAIL("expected an analysis error");
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::Analysis);
    }
}

TEST_CASE("rule sets round-trip through JSON with a stable digest") {
    auto original = rules();
    auto text = original.to_json();
    auto reparsed = RuleSet::from_json(text);
    CHECK(reparsed.to_json() == text);
    CHECK(reparsed.digest() == original.digest());
    CHECK(reparsed.rules().size() == original.rules().size());

    auto parsed = extract_score("Overall score: 3*.", reparsed);
    REQUIRE(parsed.has_value());
    CHECK(*parsed->value == 3.0);
}

TEST_CASE("rule set validation") {
    auto expect_config_error = [](const std::string& json_text) {
        CAPTURE(json_text);
        try {
            RuleSet::from_json(json_text);
            FAIL("expected a config error");
        } catch (const Error& e) {
            CHECK(e.category() == ErrorCategory::Config);
        }
    };

    expect_config_error(R"json({"rules": []})json");
    expect_config_error(R"json({"rules": [
        {"id": "a", "kind": "overall", "pattern": "x([0-9])"},
        {"id": "a", "kind": "overall", "pattern": "y([0-9])"}]})json");
    expect_config_error(R"json({"rules": [
        {"id": "a", "kind": "sideways", "pattern": "x([0-9])"}]})json");
    expect_config_error(R"json({"rules": [
        {"id": "a", "kind": "overall", "pattern": "([0-9]"}]})json");
    expect_config_error(R"json({"rules": [
        {"id": "a", "kind": "overall", "pattern": ""}]})json");
    expect_config_error("not json at all");
}

TEST_CASE("custom rule files change extraction behavior") {
    auto set = RuleSet::from_json(R"json({"rules": [
        {"id": "grade-letter", "kind": "overall",
         "pattern": "grade\\s+([0-9])"}]})json");
    auto parsed = extract_score("We assign grade 3 to this paper.", set);
    REQUIRE(parsed.has_value());
    CHECK(*parsed->value == 3.0);
    CHECK(parsed->rule_id == "grade-letter");
    // The built-in surface forms are gone under the custom set.
    CHECK_FALSE(extract_score("Overall score: 3*.", set).has_value());
}

TEST_CASE("every mock report parses: refusals to missing, the rest to values") {
    auto article = testhelp::synthetic_article(3);
    int refused = 0;
    int valued = 0;
    for (std::uint64_t seed = 0; seed < 400; ++seed) {
        CompletionRequest request;
        request.model = "m";
        request.system_text = system_prompt(StrategyId::S4);
        request.user_text =
            "Title " + std::to_string(seed % 23) + "\nAbstract variant " +
            std::to_string(seed % 7) + " of a synthetic submission.";
        auto report = mock_complete(seed, request);
        CAPTURE(report);
        auto parsed = extract_score(report, rules());
        REQUIRE(parsed.has_value());
        if (parsed->kind == ScoreKind::Missing) {
            ++refused;
        } else {
            REQUIRE(parsed->value.has_value());
            CHECK(*parsed->value >= 1.0);
            CHECK(*parsed->value <= 4.0);
            ++valued;
        }
    }
    CHECK(valued > 300);
    CHECK(refused > 0);
}

TEST_CASE("manual queue persists pending entries and resolutions") {
    testhelp::TempDir tmp("queue");
    auto file = tmp.path() / "queue.jsonl";

    std::string id;
    {
        auto queue = ManualQueue::load(file);
        CHECK(queue.empty());
        id = queue.add("abstract_s2_gpt-4o", "a01", 2, "???");
        CHECK(id == "abstract_s2_gpt-4o/a01#2");
        queue.add("abstract_s2_gpt-4o", "a07", 0, "unclear");
        // The same article/iteration in a different cell is a distinct entry.
        queue.add("title_s2_gpt-4o", "a01", 2, "???");
        CHECK_THROWS_AS(queue.add("abstract_s2_gpt-4o", "a01", 2, "again"), Error);
        CHECK(queue.pending().size() == 3);
    }

    {
        auto queue = ManualQueue::load(file);
        CHECK(queue.pending().size() == 3);
        auto entry = queue.find(id);
        REQUIRE(entry.has_value());
        CHECK(entry->cell == "abstract_s2_gpt-4o");
        CHECK(entry->article_id == "a01");
        CHECK(entry->iteration == 2);
        CHECK(entry->report == "???");
        CHECK_FALSE(entry->resolved);

        auto score = queue.resolve(id, 3.0, "read the report by hand");
        CHECK(score.kind == ScoreKind::Manual);
        CHECK(*score.value == 3.0);
        CHECK(queue.pending().size() == 2);
        CHECK_THROWS_AS(queue.resolve(id, 2.0), Error);
        CHECK_THROWS_AS(queue.resolve("no/such#9", 2.0), Error);
        CHECK_THROWS_AS(queue.resolve("abstract_s2_gpt-4o/a07#0", 4.5), Error);
    }

    auto reloaded = ManualQueue::load(file);
    CHECK(reloaded.pending().size() == 2);
    auto entry = reloaded.find(id);
    REQUIRE(entry.has_value());
    CHECK(entry->resolved);
    REQUIRE(entry->value.has_value());
    CHECK(*entry->value == 3.0);
    CHECK(entry->note == "read the report by hand");
}

TEST_CASE("queue files reject unknown record types and dangling resolutions") {
    testhelp::TempDir tmp("queue_bad");

    auto bad_type = tmp.path() / "bad_type.jsonl";
    write_file_atomic(bad_type, "{\"type\": \"mystery\"}\n");
    CHECK_THROWS_AS(ManualQueue::load(bad_type), Error);

    auto dangling = tmp.path() / "dangling.jsonl";
    write_file_atomic(dangling,
                      "{\"type\": \"resolved\", \"entry_id\": \"c/a#0\", "
                      "\"value\": 3.0, \"note\": \"\"}\n");
    try {
        ManualQueue::load(dangling);
        FAIL("expected a queue error");
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::Queue);
    }
}
