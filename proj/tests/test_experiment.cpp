#include <doctest.h>

#include <map>

#include <json.hpp>

#include "helpers.hpp"
#include "refscore/experiment.hpp"
#include "refscore/scorebook.hpp"
#include "refscore/util.hpp"

using namespace refscore;

namespace {

ExperimentConfig mock_config(const std::filesystem::path& corpus_dir,
                             const std::filesystem::path& out_dir) {
    ExperimentConfig config;
    config.corpus_dir = corpus_dir;
    config.views = {ViewKind::Abstract};
    config.strategies = {StrategyId::S2, StrategyId::S5};
    config.models = {"gpt-4o"};
    config.iterations = 6;
    config.backend = BackendKind::Mock;
    config.seed = 1;
    config.out_dir = out_dir;
    config.fixed_timestamp = "2024-01-01T00:00:00Z";
    return config;
}

std::filesystem::path write_corpus(const testhelp::TempDir& tmp, int articles) {
    auto dir = tmp.path() / "corpus";
    save_corpus(testhelp::synthetic_corpus(articles), dir);
    return dir;
}

// Comma split; report labels never contain quoted commas.
std::vector<std::string> fields_of(const std::string& line) {
    std::vector<std::string> out;
    std::string current;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(current);
            current.clear();
        } else {
            current.push_back(ch);
        }
    }
    out.push_back(current);
    return out;
}

// All run artifacts that must be byte-stable, keyed by relative path.
std::map<std::string, std::string> artifact_bytes(const std::filesystem::path& dir,
                                                  bool include_manifest) {
    std::map<std::string, std::string> out;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto rel = std::filesystem::relative(entry.path(), dir).generic_string();
        if (!include_manifest && rel == "manifest.json") continue;
        out[rel] = read_file(entry.path());
    }
    return out;
}

}  // namespace

TEST_CASE("a mock run writes the full artifact tree") {
    testhelp::TempDir tmp("run");
    auto config = mock_config(write_corpus(tmp, 8), tmp.path() / "out");

    auto result = run_experiment(config);
    CHECK(result.complete());
    REQUIRE(result.cells.size() == 2);
    for (const auto& cell : result.cells) {
        CHECK(cell.completed);
        CHECK(cell.pending_entries.empty());
        CHECK(cell.full_correlation.has_value());
        CHECK(cell.calibration.has_value());
    }
    CHECK(result.cells[0].spec.name() == "abstract_s2_gpt-4o");
    CHECK(result.cells[1].spec.name() == "abstract_s5_gpt-4o");

    auto out = tmp.path() / "out";
    CHECK(std::filesystem::exists(out / "manifest.json"));
    CHECK(std::filesystem::exists(out / "cache.jsonl"));
    CHECK(std::filesystem::exists(out / "calibration.csv"));
    CHECK_FALSE(std::filesystem::exists(out / "queue.jsonl"));

    for (const auto& name : {"abstract_s2_gpt-4o", "abstract_s5_gpt-4o"}) {
        auto cell_dir = out / "cells" / name;
        auto matrix = matrix_from_csv(read_file(cell_dir / "matrix.csv"));
        CHECK(matrix.article_count() == 8);
        CHECK(matrix.iterations == 6);
        auto curve_lines = split_lines(read_file(cell_dir / "curve.csv"));
        CHECK(curve_lines.size() == 1 + 6);
    }

    // One cached completion per cell x article x iteration.
    auto cache = CompletionCache::load(out / "cache.jsonl");
    CHECK(cache.size() == 2 * 8 * 6);

    auto manifest = nlohmann::json::parse(read_file(out / "manifest.json"));
    CHECK(manifest.at("kind") == "run_manifest");
    CHECK(manifest.at("created") == "2024-01-01T00:00:00Z");
    CHECK(manifest.at("cells").size() == 2);
    CHECK(manifest.at("cells")[0].at("status") == "completed");
    CHECK(manifest.at("config").at("iterations") == 6);
}

TEST_CASE("rerunning into the same directory is a no-op on artifacts") {
    testhelp::TempDir tmp("rerun");
    auto config = mock_config(write_corpus(tmp, 6), tmp.path() / "out");

    run_experiment(config);
    auto before = artifact_bytes(tmp.path() / "out", true);
    auto again = run_experiment(config);
    CHECK(again.complete());
    CHECK(artifact_bytes(tmp.path() / "out", true) == before);
}

TEST_CASE("the same seed reproduces artifacts in a fresh directory") {
    testhelp::TempDir tmp("repro");
    auto corpus_dir = write_corpus(tmp, 6);
    auto config_a = mock_config(corpus_dir, tmp.path() / "out_a");
    auto config_b = mock_config(corpus_dir, tmp.path() / "out_b");

    run_experiment(config_a);
    run_experiment(config_b);

    // Identical except the manifest, which records its own output path.
    auto a = artifact_bytes(tmp.path() / "out_a", false);
    auto b = artifact_bytes(tmp.path() / "out_b", false);
    CHECK(a == b);
    CHECK(a.count("cache.jsonl") == 1);
    CHECK(a.count("calibration.csv") == 1);

    // A different seed changes the completions.
    auto config_c = mock_config(corpus_dir, tmp.path() / "out_c");
    config_c.seed = 2;
    run_experiment(config_c);
    auto c = artifact_bytes(tmp.path() / "out_c", false);
    CHECK(c.at("cache.jsonl") != a.at("cache.jsonl"));
}

TEST_CASE("analyze recomputes a run offline, byte for byte") {
    testhelp::TempDir tmp("analyze");
    auto config = mock_config(write_corpus(tmp, 8), tmp.path() / "out");

    run_experiment(config);
    auto before = artifact_bytes(tmp.path() / "out", true);

    auto result = analyze_run(tmp.path() / "out");
    CHECK(result.complete());
    CHECK(artifact_bytes(tmp.path() / "out", true) == before);
}

TEST_CASE("analyze rejects drifted parser rules") {
    testhelp::TempDir tmp("drift");
    auto rules_file = tmp.path() / "rules.json";
    write_file_atomic(rules_file, RuleSet::built_in().to_json());

    auto config = mock_config(write_corpus(tmp, 6), tmp.path() / "out");
    config.rules_file = rules_file;
    run_experiment(config);

    // Narrow the rule set after the run; digests no longer match.
    write_file_atomic(rules_file, R"json({"rules": [
        {"id": "only", "kind": "overall", "pattern": "score[:=]\\s*([0-9])"}]})json");
    try {
        analyze_run(tmp.path() / "out");
        FAIL("expected a drift error");
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::Analysis);
        CHECK(std::string(e.what()).find("drifted") != std::string::npos);
    }
}

TEST_CASE("unparseable reports queue up, halt the cell, and resolve") {
    testhelp::TempDir tmp("queue_halt");
    auto rules_file = tmp.path() / "rules.json";
    write_file_atomic(rules_file, R"json({"rules": [
        {"id": "never", "kind": "overall", "pattern": "certainly-absent-([0-9])"}]})json");

    auto config = mock_config(write_corpus(tmp, 5), tmp.path() / "out");
    config.strategies = {StrategyId::S2};
    config.iterations = 4;
    config.rules_file = rules_file;

    auto result = run_experiment(config);
    CHECK_FALSE(result.complete());
    CHECK(result.halted_cells() == std::vector<std::string>{"abstract_s2_gpt-4o"});
    CHECK(result.cells[0].pending_entries.size() == 5 * 4);
    CHECK_FALSE(std::filesystem::exists(tmp.path() / "out" / "cells" /
                                        "abstract_s2_gpt-4o" / "matrix.csv"));

    auto manifest = nlohmann::json::parse(read_file(tmp.path() / "out" / "manifest.json"));
    CHECK(manifest.at("cells")[0].at("status") == "pending-queue");
    CHECK(manifest.at("cells")[0].at("pending").size() == 20);

    // An incomplete run cannot be reported.
    try {
        report_run(tmp.path() / "out");
        FAIL("expected a queue error");
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::Queue);
        CHECK(std::string(e.what()).find("abstract_s2_gpt-4o") != std::string::npos);
    }

    // Resolve every entry by hand, then re-analyze from the cache.
    auto queue = ManualQueue::load(tmp.path() / "out" / "queue.jsonl");
    auto pending = queue.pending();
    REQUIRE(pending.size() == 20);
    for (std::size_t i = 0; i < pending.size(); ++i) {
        queue.resolve(pending[i].entry_id, 1.0 + 0.5 * static_cast<double>(i % 7));
    }

    auto analyzed = analyze_run(tmp.path() / "out");
    CHECK(analyzed.complete());
    auto matrix = matrix_from_csv(read_file(tmp.path() / "out" / "cells" /
                                            "abstract_s2_gpt-4o" / "matrix.csv"));
    CHECK(matrix.article_count() == 5);
    for (const auto& row : matrix.cells) {
        for (const auto& cell : row) CHECK(cell.has_value());
    }
    CHECK(*matrix.cells[0][1] == 1.5);  // second resolution in queue order
}

TEST_CASE("report collates a completed run") {
    testhelp::TempDir tmp("report");
    auto config = mock_config(write_corpus(tmp, 8), tmp.path() / "out");
    run_experiment(config);
    report_run(tmp.path() / "out");

    auto report = tmp.path() / "out" / "report";
    auto curves = split_lines(read_file(report / "curves.csv"));
    CHECK(curves[0] == "cell,k,mean,sd,ci_low,ci_high,samples,excluded");
    REQUIRE(curves.size() == 1 + 2 * 6);
    CHECK(curves[1].rfind("abstract_s2_gpt-4o,1,", 0) == 0);
    CHECK(curves[7].rfind("abstract_s5_gpt-4o,1,", 0) == 0);

    auto corr = split_lines(read_file(report / "correlations.csv"));
    REQUIRE(corr.size() == 4);
    CHECK(corr[0] == "cell,abstract_s2_gpt-4o,abstract_s5_gpt-4o,human");
    auto row1 = fields_of(corr[1]);
    auto row2 = fields_of(corr[2]);
    auto row3 = fields_of(corr[3]);
    CHECK(row1[1] == "1");
    CHECK(row2[2] == "1");
    CHECK(row3[3] == "1");
    CHECK(row1[2] == row2[1]);
    CHECK(row1[3] == row3[1]);

    auto means = split_lines(read_file(report / "means.csv"));
    REQUIRE(means.size() == 4);
    CHECK(means[0] == "cell,mean_score");
    CHECK(means[3].rfind("human,", 0) == 0);

    CHECK(std::filesystem::exists(report / "calibration.csv"));
    auto summary = read_file(report / "summary.txt");
    CHECK(summary.find("cells:") != std::string::npos);
    CHECK(summary.find("abstract_s2_gpt-4o") != std::string::npos);
}

TEST_CASE("config json round-trips and rejects unknown keys") {
    auto config = mock_config("/data/corpus", "/data/out");
    config.rules_file = "/data/rules.json";
    auto text = config.to_json();
    auto reparsed = ExperimentConfig::from_json(text);
    CHECK(reparsed.to_json() == text);
    CHECK(reparsed.views == config.views);
    CHECK(reparsed.strategies == config.strategies);
    CHECK(reparsed.seed == config.seed);
    CHECK(reparsed.fixed_timestamp == config.fixed_timestamp);

    try {
        ExperimentConfig::from_json(R"({"corpse": "typo"})");
        FAIL("expected a config error");
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::Config);
        CHECK(std::string(e.what()).find("corpse") != std::string::npos);
    }
    CHECK_THROWS_AS(ExperimentConfig::from_json("[1,2]"), Error);
    CHECK_THROWS_AS(ExperimentConfig::from_json("{nope"), Error);
}

TEST_CASE("relative config paths resolve against the config directory") {
    auto config = ExperimentConfig::from_json(
        R"({"corpus": "corpus", "out": "runs/x", "rules": "r.json"})", "/base/dir");
    CHECK(config.corpus_dir == std::filesystem::path("/base/dir/corpus"));
    CHECK(config.out_dir == std::filesystem::path("/base/dir/runs/x"));
    CHECK(config.rules_file == std::filesystem::path("/base/dir/r.json"));

    auto absolute = ExperimentConfig::from_json(
        R"({"corpus": "/abs/corpus"})", "/base/dir");
    CHECK(absolute.corpus_dir == std::filesystem::path("/abs/corpus"));
}

TEST_CASE("config validation rejects impossible experiments") {
    auto valid = mock_config("/c", "/o");
    valid.validate();

    auto check_rejected = [](ExperimentConfig config) {
        CHECK_THROWS_AS(config.validate(), Error);
    };
    auto broken = mock_config("/c", "/o");
    broken.strategies.clear();
    check_rejected(broken);
    broken = mock_config("/c", "/o");
    broken.views.clear();
    check_rejected(broken);
    broken = mock_config("/c", "/o");
    broken.models = {"m", "m"};
    check_rejected(broken);
    broken = mock_config("/c", "/o");
    broken.iterations = 0;
    check_rejected(broken);
    broken = mock_config("/c", "/o");
    broken.confidence_level = 1.0;
    check_rejected(broken);
    broken = mock_config("/c", "/o");
    broken.out_dir.clear();
    check_rejected(broken);
    broken = mock_config("/c", "/o");
    broken.sampling.top_p = 0.0;
    check_rejected(broken);
}

TEST_CASE("a missing corpus fails before any completion work") {
    testhelp::TempDir tmp("nocorpus");
    auto config = mock_config(tmp.path() / "missing", tmp.path() / "out");
    try {
        run_experiment(config);
        FAIL("expected a corpus error");
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::Corpus);
    }
    CHECK_FALSE(std::filesystem::exists(tmp.path() / "out" / "manifest.json"));
}
