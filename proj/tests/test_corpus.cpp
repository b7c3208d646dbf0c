#include <doctest.h>

#include <json.hpp>

#include "helpers.hpp"
#include "refscore/corpus.hpp"
#include "refscore/prompts.hpp"

using namespace refscore;

namespace {

std::vector<std::pair<std::string, std::string>> extracted_pages() {
    return {
        {"1", "Journal of Example Studies\nScholarly reading patterns in context\nWe study how"},
        {"1", "readers approach long documents in practice."},
        {"1", "1"},
        {"2", "Journal of Example Studies\nThe second page continues with a fresh paragraph."},
        {"2", "2"},
        {"3", "Journal of Example Studies\nA third page paragraph, also complete."},
        {"3", "3"},
    };
}

}  // namespace

TEST_CASE("cleaning merges continuation blocks and strips page noise") {
    auto paragraphs = clean_blocks(extracted_pages());
    REQUIRE(paragraphs.size() == 3);
    CHECK(paragraphs[0] ==
          "Scholarly reading patterns in context We study how readers approach long "
          "documents in practice.");
    CHECK(paragraphs[1] == "The second page continues with a fresh paragraph.");
    CHECK(paragraphs[2] == "A third page paragraph, also complete.");
    for (const auto& p : paragraphs) {
        CHECK(p.find("Journal of Example Studies") == std::string::npos);
    }
}

TEST_CASE("header removal needs the configured page threshold") {
    std::vector<std::pair<std::string, std::string>> two_pages = {
        {"1", "Repeated Banner\nFirst page text."},
        {"2", "Repeated Banner\nSecond page text."},
    };
    auto kept = clean_blocks(two_pages);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].find("Repeated Banner") != std::string::npos);

    CleanOptions loose;
    loose.header_page_threshold = 2;
    auto stripped = clean_blocks(two_pages, loose);
    REQUIRE(stripped.size() == 2);
    CHECK(stripped[0] == "First page text.");
}

TEST_CASE("cleaning is idempotent") {
    auto once = clean_blocks(extracted_pages());
    std::vector<std::pair<std::string, std::string>> again;
    for (const auto& p : once) again.emplace_back("1", p);
    auto twice = clean_blocks(again);
    CHECK(twice == once);
}

TEST_CASE("table blocks never merge with prose") {
    std::vector<TextBlock> blocks = {
        {"1", "A sentence that clearly trails off without", false},
        {"1", "Table 1. Reader counts by venue", true},
        {"1", "any punctuation to end it.", false},
    };
    auto paragraphs = clean_blocks_flagged(blocks);
    REQUIRE(paragraphs.size() == 3);
    CHECK_FALSE(paragraphs[0].is_table);
    CHECK(paragraphs[1].is_table);
    // The dangling sentence may not absorb the table or the text after it.
    CHECK(paragraphs[0].text == "A sentence that clearly trails off without");
    CHECK(paragraphs[2].text == "any punctuation to end it.");
}

TEST_CASE("views assemble the documented layers") {
    Article article;
    article.id = "x1";
    article.title = "A title";
    article.abstract = "An abstract.";
    article.human_score = 3.0;
    article.body = {{"Opening paragraph.", false},
                    {"Table 2. Numbers", true},
                    {"Closing paragraph.", false},
                    {"References", false},
                    {"Someone (2019). Cited thing.", false}};

    auto title = build_view(article, ViewKind::Title);
    CHECK(title.text == "A title");

    auto abstract = build_view(article, ViewKind::Abstract);
    CHECK(abstract.text == "A title\nAn abstract.");

    auto truncated = build_view(article, ViewKind::Truncated);
    CHECK(truncated.text ==
          "A title\nAn abstract.\nOpening paragraph.\nClosing paragraph.");
    CHECK(truncated.text.find("Table 2") == std::string::npos);
    CHECK(truncated.text.find("Cited thing") == std::string::npos);
}

TEST_CASE("reference heading variants stop the truncated view") {
    Article article;
    article.id = "x2";
    article.title = "T";
    article.abstract = "A.";
    article.human_score = 2.0;

    for (const std::string heading :
         {"References", "REFERENCES", "7 References", "References:", "Bibliography."}) {
        article.body = {{"Kept text.", false}, {heading, false}, {"Dropped.", false}};
        auto view = build_view(article, ViewKind::Truncated);
        CHECK(view.text.find("Kept text.") != std::string::npos);
        CHECK(view.text.find("Dropped.") == std::string::npos);
    }
}

TEST_CASE("truncated view with no body is a corpus error naming the article") {
    Article article;
    article.id = "ghost7";
    article.title = "T";
    article.abstract = "A.";
    article.human_score = 2.0;
    try {
        build_view(article, ViewKind::Truncated);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::Corpus);
        CHECK(std::string(e.what()).find("ghost7") != std::string::npos);
    }
}

TEST_CASE("custom ids round-trip, including ids containing the separator") {
    CHECK(make_custom_id("a01", 4) == "a01#4");
    auto parsed = parse_custom_id("odd#id#12");
    CHECK(parsed.article_id == "odd#id");
    CHECK(parsed.iteration == 12);
    CHECK_THROWS_AS(parse_custom_id("no-separator"), Error);
    CHECK_THROWS_AS(parse_custom_id("trailing#"), Error);
}

TEST_CASE("request lines carry the full prompt surface") {
    auto corpus = testhelp::synthetic_corpus(3);
    auto lines = to_jsonl(corpus, ViewKind::Abstract, StrategyId::S2, "gpt-4o", 4);
    REQUIRE(lines.size() == 12);

    auto first = nlohmann::json::parse(lines[0]);
    CHECK(first.at("custom_id") == "a01#0");
    CHECK(first.at("model") == "gpt-4o");
    CHECK(first.at("temperature") == 1.0);
    CHECK(first.at("top_p") == 1.0);
    CHECK(first.at("max_tokens") == 1000);
    REQUIRE(first.at("messages").size() == 2);
    CHECK(first["messages"][0]["role"] == "system");
    CHECK(first["messages"][0]["content"] == system_prompt(StrategyId::S2));
    CHECK(first["messages"][1]["role"] == "user");
    auto user = first["messages"][1]["content"].get<std::string>();
    CHECK(user.rfind(kUserPromptPrefix, 0) == 0);
    CHECK(user.find(corpus.articles[0].title) != std::string::npos);

    // Iterations share identical request content; only the id differs.
    auto second = nlohmann::json::parse(lines[1]);
    CHECK(second.at("custom_id") == "a01#1");
    second["custom_id"] = first["custom_id"];
    CHECK(first == second);
}

TEST_CASE("request building rejects duplicate article ids") {
    auto corpus = testhelp::synthetic_corpus(2);
    corpus.articles[1].id = corpus.articles[0].id;
    CHECK_THROWS_AS(to_jsonl(corpus, ViewKind::Title, StrategyId::S1, "m", 1), Error);
}

TEST_CASE("corpus save and load round-trip") {
    testhelp::TempDir tmp("corpus_rt");
    auto corpus = testhelp::synthetic_corpus(5);
    corpus.articles[2].id = "weird/id with spaces";
    save_corpus(corpus, tmp.path());

    auto loaded = load_corpus(tmp.path());
    REQUIRE(loaded.articles.size() == corpus.articles.size());
    CHECK(loaded.metadata == corpus.metadata);
    for (std::size_t i = 0; i < corpus.articles.size(); ++i) {
        const auto& a = corpus.articles[i];
        const auto& b = loaded.articles[i];
        CHECK(a.id == b.id);
        CHECK(a.title == b.title);
        CHECK(a.abstract == b.abstract);
        CHECK(a.human_score == b.human_score);
        REQUIRE(a.body.size() == b.body.size());
        for (std::size_t p = 0; p < a.body.size(); ++p) {
            CHECK(a.body[p].text == b.body[p].text);
            CHECK(a.body[p].is_table == b.body[p].is_table);
        }
    }
}

TEST_CASE("raw ingestion cleans blocks and validates") {
    std::string raw = R"({
        "id": "r1",
        "title": "Raw article",
        "abstract": "Its abstract.",
        "human_score": 3.5,
        "blocks": [
            {"page": "1", "text": "Venue Header\nBody text that continues"},
            {"page": "1", "text": "across blocks."},
            {"page": "2", "text": "Venue Header\nNext paragraph."},
            {"page": "3", "text": "Venue Header\nLast paragraph."},
            {"page": "3", "text": "Table 1. Data", "is_table": true}
        ]
    })";
    auto article = ingest_raw_article(raw);
    CHECK(article.id == "r1");
    CHECK(article.human_score == 3.5);
    REQUIRE(article.body.size() == 4);
    CHECK(article.body[0].text == "Body text that continues across blocks.");
    CHECK(article.body[3].is_table);
    for (const auto& p : article.body) {
        CHECK(p.text.find("Venue Header") == std::string::npos);
    }

    CHECK_THROWS_AS(ingest_raw_article("{\"id\": \"x\"}"), Error);
}

TEST_CASE("corpus validation rejects bad scores and duplicates") {
    auto corpus = testhelp::synthetic_corpus(2);
    corpus.articles[0].human_score = 4.5;
    CHECK_THROWS_AS(validate_corpus(corpus), Error);

    corpus = testhelp::synthetic_corpus(2);
    corpus.articles[1].id = corpus.articles[0].id;
    CHECK_THROWS_AS(validate_corpus(corpus), Error);
}
