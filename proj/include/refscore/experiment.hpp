#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "refscore/corpus.hpp"
#include "refscore/llm_client.hpp"
#include "refscore/score_parser.hpp"
#include "refscore/stats.hpp"
#include "refscore/types.hpp"

namespace refscore {

// Full description of a batch run: which corpus, which grid of
// (view, strategy, model) cells, how many iterations, and how to talk to
// the model. Loadable from a JSON config file; CLI flags override fields.
struct ExperimentConfig {
    std::filesystem::path corpus_dir;
    std::vector<ViewKind> views;
    std::vector<StrategyId> strategies;
    std::vector<std::string> models;
    int iterations = 30;
    BackendKind backend = BackendKind::Mock;
    SamplingParams sampling;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir;
    int parallel = 4;
    double confidence_level = 0.95;
    bool round_scores = false;
    bool leave_one_out = false;
    MockConfig mock;
    LiveConfig live;
    // Stamp for manifest and cache records; empty uses the wall clock.
    std::string fixed_timestamp;
    // Extraction rules file; empty uses the built-in set.
    std::filesystem::path rules_file;
    ViewOptions view_options;

    static ExperimentConfig from_json(const std::string& json_text,
                                      const std::filesystem::path& base_dir = {});
    static ExperimentConfig from_json_file(const std::filesystem::path& path);
    std::string to_json() const;

    void validate() const;
};

struct CellSpec {
    ViewKind view = ViewKind::Abstract;
    StrategyId strategy = StrategyId::S0;
    std::string model;

    std::string name() const;  // view_strategy_model, path-safe
};

struct CellStatus {
    CellSpec spec;
    bool completed = false;
    std::vector<std::string> pending_entries;  // queue ids blocking this cell
    std::optional<CalibrationModel> calibration;
    std::optional<double> full_correlation;  // k = n curve value
};

struct RunResult {
    std::filesystem::path dir;
    std::vector<CellStatus> cells;

    bool complete() const;
    std::vector<std::string> halted_cells() const;
};

// Runs every cell: collect reports (through the configured backend), parse
// scores, queue unparseable reports, and for each unblocked cell write
// matrix.csv and curve.csv under cells/<name>/ plus a run-level
// calibration.csv. manifest.json is written last. A cell with pending
// queue entries is skipped, not fatal; other cells proceed.
RunResult run_experiment(const ExperimentConfig& config);

// Recomputes every artifact of an existing run from its cache (no network),
// folding in any queue resolutions made since. Fails if prompt texts or
// parser rules have drifted from the manifest's digests.
RunResult analyze_run(const std::filesystem::path& run_dir);

// Renders a completed run into report/: combined curve plot data, the
// cross-cell (and human) rank-correlation table, mean-score table,
// calibration table, and a plain-text summary. Errors listing the missing
// cells when the run is incomplete.
void report_run(const std::filesystem::path& run_dir);

}  // namespace refscore
