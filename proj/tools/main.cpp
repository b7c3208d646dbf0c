#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "refscore/corpus.hpp"
#include "refscore/experiment.hpp"
#include "refscore/prompts.hpp"
#include "refscore/score_parser.hpp"
#include "refscore/types.hpp"
#include "refscore/util.hpp"

namespace {

using refscore::Error;
using refscore::ErrorCategory;

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    for (char ch : text) {
        if (ch == ',') {
            if (!refscore::trim(item).empty()) out.push_back(refscore::trim(item));
            item.clear();
        } else {
            item += ch;
        }
    }
    if (!refscore::trim(item).empty()) out.push_back(refscore::trim(item));
    return out;
}

struct RunFlags {
    std::string config_file;
    std::string corpus;
    std::string views;
    std::string strategies;
    std::string models;
    int iterations = 0;
    std::string backend;
    std::uint64_t seed = 0;
    std::string out;
    int parallel = 0;
    double confidence_level = 0.0;
    bool round_scores = false;
    bool leave_one_out = false;
    double temperature = 0.0;
    double top_p = 0.0;
    int max_tokens = 0;
    std::string timestamp;
    std::string rules;
};

void add_run_flags(CLI::App* cmd, RunFlags& flags) {
    cmd->add_option("--config", flags.config_file, "JSON config file; flags override it");
    cmd->add_option("--corpus", flags.corpus, "Corpus directory");
    cmd->add_option("--views", flags.views, "Comma list: title,abstract,truncated");
    cmd->add_option("--strategies", flags.strategies,
                    "Comma list: s0..s6,s6_minus_defs");
    cmd->add_option("--models", flags.models, "Comma list of model ids");
    cmd->add_option("--iterations", flags.iterations, "Completions per article");
    cmd->add_option("--backend", flags.backend, "live, mock, or replay");
    cmd->add_option("--seed", flags.seed, "Random seed");
    cmd->add_option("--out", flags.out, "Run output directory");
    cmd->add_option("--parallel", flags.parallel, "Max in-flight live requests");
    cmd->add_option("--confidence-level", flags.confidence_level,
                    "Curve confidence level, e.g. 0.95");
    cmd->add_flag("--round-scores", flags.round_scores,
                  "Round calibrated predictions to whole numbers");
    cmd->add_flag("--leave-one-out", flags.leave_one_out,
                  "Evaluate calibration MAD leave-one-out");
    cmd->add_option("--temperature", flags.temperature, "Sampling temperature");
    cmd->add_option("--top-p", flags.top_p, "Sampling top_p");
    cmd->add_option("--max-tokens", flags.max_tokens, "Completion token cap");
    cmd->add_option("--timestamp", flags.timestamp,
                    "Fixed timestamp for reproducible artifacts");
    cmd->add_option("--rules", flags.rules, "Score extraction rules JSON file");
}

refscore::ExperimentConfig config_from_flags(const CLI::App* cmd, const RunFlags& flags) {
    refscore::ExperimentConfig config;
    if (!flags.config_file.empty()) {
        config = refscore::ExperimentConfig::from_json_file(flags.config_file);
    }
    if (cmd->count("--corpus")) config.corpus_dir = flags.corpus;
    if (cmd->count("--views")) {
        config.views.clear();
        for (const auto& v : split_list(flags.views)) {
            config.views.push_back(refscore::parse_view_kind(v));
        }
    }
    if (cmd->count("--strategies")) {
        config.strategies.clear();
        for (const auto& s : split_list(flags.strategies)) {
            config.strategies.push_back(refscore::parse_strategy_id(s));
        }
    }
    if (cmd->count("--models")) config.models = split_list(flags.models);
    if (cmd->count("--iterations")) config.iterations = flags.iterations;
    if (cmd->count("--backend")) {
        config.backend = refscore::parse_backend_kind(flags.backend);
    }
    if (cmd->count("--seed")) config.seed = flags.seed;
    if (cmd->count("--out")) config.out_dir = flags.out;
    if (cmd->count("--parallel")) config.parallel = flags.parallel;
    if (cmd->count("--confidence-level")) config.confidence_level = flags.confidence_level;
    if (cmd->count("--round-scores")) config.round_scores = flags.round_scores;
    if (cmd->count("--leave-one-out")) config.leave_one_out = flags.leave_one_out;
    if (cmd->count("--temperature")) config.sampling.temperature = flags.temperature;
    if (cmd->count("--top-p")) config.sampling.top_p = flags.top_p;
    if (cmd->count("--max-tokens")) config.sampling.max_tokens = flags.max_tokens;
    if (cmd->count("--timestamp")) config.fixed_timestamp = flags.timestamp;
    if (cmd->count("--rules")) config.rules_file = flags.rules;
    return config;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"Batch research-quality scoring over an article corpus"};
    app.require_subcommand(1);

    // ingest
    std::string ingest_raw_dir;
    std::string ingest_out;
    auto* ingest = app.add_subcommand("ingest", "Build a corpus from raw article JSON");
    ingest->add_option("raw-dir", ingest_raw_dir, "Directory of raw article JSON files")
        ->required();
    ingest->add_option("--out", ingest_out, "Corpus output directory")->required();

    // views
    RunFlags views_flags;
    auto* views = app.add_subcommand(
        "views", "Emit request JSONL batches for each view/strategy/model");
    add_run_flags(views, views_flags);

    // prompts export
    auto* prompts = app.add_subcommand("prompts", "Prompt text utilities");
    prompts->require_subcommand(1);
    std::string prompts_out;
    auto* prompts_export =
        prompts->add_subcommand("export", "Write every system prompt to a directory");
    prompts_export->add_option("--out", prompts_out, "Output directory")->required();

    // run
    RunFlags run_flags;
    auto* run = app.add_subcommand("run", "Run a full experiment grid");
    add_run_flags(run, run_flags);

    // queue list / resolve
    auto* queue_cmd = app.add_subcommand("queue", "Manual score-resolution queue");
    queue_cmd->require_subcommand(1);
    std::string queue_list_dir;
    auto* queue_list = queue_cmd->add_subcommand("list", "List pending queue entries");
    queue_list->add_option("run-dir", queue_list_dir, "Run directory")->required();
    std::string queue_resolve_dir;
    std::string queue_entry;
    double queue_value = 0.0;
    std::string queue_note;
    auto* queue_resolve =
        queue_cmd->add_subcommand("resolve", "Record a manual score for an entry");
    queue_resolve->add_option("run-dir", queue_resolve_dir, "Run directory")->required();
    queue_resolve->add_option("entry-id", queue_entry, "Queue entry id")->required();
    queue_resolve->add_option("value", queue_value, "Score in [1,4]")->required();
    queue_resolve->add_option("--note", queue_note, "Reviewer note");

    // analyze
    std::string analyze_dir;
    auto* analyze =
        app.add_subcommand("analyze", "Recompute run artifacts from its cache");
    analyze->add_option("run-dir", analyze_dir, "Run directory")->required();

    // report
    std::string report_dir;
    auto* report = app.add_subcommand("report", "Render report tables for a run");
    report->add_option("run-dir", report_dir, "Run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : refscore::exit_code_for(ErrorCategory::Config);
    }

    if (ingest->parsed()) {
        auto corpus = refscore::ingest_raw_directory(ingest_raw_dir);
        refscore::validate_corpus(corpus);
        refscore::save_corpus(corpus, ingest_out);
        std::printf("ingested %zu articles into %s\n", corpus.articles.size(),
                    ingest_out.c_str());
        return 0;
    }

    if (views->parsed()) {
        auto config = config_from_flags(views, views_flags);
        if (config.corpus_dir.empty()) {
            throw Error(ErrorCategory::Config, "views needs --corpus");
        }
        if (config.out_dir.empty()) {
            throw Error(ErrorCategory::Config, "views needs --out");
        }
        if (config.views.empty() || config.strategies.empty() || config.models.empty()) {
            throw Error(ErrorCategory::Config,
                        "views needs --views, --strategies, and --models");
        }
        auto corpus = refscore::load_corpus(config.corpus_dir);
        refscore::validate_corpus(corpus);
        std::filesystem::create_directories(config.out_dir);
        for (auto view : config.views) {
            for (auto strategy : config.strategies) {
                for (const auto& model : config.models) {
                    refscore::CellSpec spec{view, strategy, model};
                    auto lines = refscore::to_jsonl(corpus, view, strategy, model,
                                                    config.iterations, config.sampling,
                                                    config.view_options);
                    std::string body;
                    for (const auto& line : lines) body += line + "\n";
                    auto path = config.out_dir / ("requests_" + spec.name() + ".jsonl");
                    refscore::write_file_atomic(path, body);
                    std::printf("%s: %zu requests\n", path.c_str(), lines.size());
                }
            }
        }
        return 0;
    }

    if (prompts_export->parsed()) {
        std::filesystem::path dir(prompts_out);
        std::filesystem::create_directories(dir);
        nlohmann::ordered_json digests;
        for (auto strategy : refscore::all_strategies()) {
            auto name = refscore::to_string(strategy);
            const auto& text = refscore::system_prompt(strategy);
            refscore::write_file_atomic(dir / (name + ".txt"), text);
            digests[name] = refscore::fnv1a64_hex(text);
        }
        refscore::write_file_atomic(dir / "user_prompt_prefix.txt",
                                    refscore::kUserPromptPrefix);
        digests["user_prompt_prefix"] = refscore::fnv1a64_hex(refscore::kUserPromptPrefix);
        refscore::write_file_atomic(dir / "digests.json", digests.dump(2) + "\n");
        std::printf("wrote %zu prompt files to %s\n",
                    refscore::all_strategies().size() + 1, prompts_out.c_str());
        return 0;
    }

    if (run->parsed()) {
        auto config = config_from_flags(run, run_flags);
        auto result = refscore::run_experiment(config);
        for (const auto& cell : result.cells) {
            if (cell.completed) {
                std::printf("cell %s: completed", cell.spec.name().c_str());
                if (cell.full_correlation) {
                    std::printf(", rank correlation %s",
                                refscore::format_number(*cell.full_correlation).c_str());
                }
                std::printf("\n");
            } else {
                std::printf("cell %s: %zu reports need manual scores\n",
                            cell.spec.name().c_str(), cell.pending_entries.size());
            }
        }
        if (!result.complete()) {
            std::fprintf(stderr,
                         "run incomplete: resolve queue entries (queue list %s), "
                         "then rerun analysis (analyze %s)\n",
                         result.dir.c_str(), result.dir.c_str());
            return refscore::exit_code_for(ErrorCategory::Queue);
        }
        std::printf("run complete: %s\n", result.dir.c_str());
        return 0;
    }

    if (queue_list->parsed()) {
        auto queue =
            refscore::ManualQueue::load(std::filesystem::path(queue_list_dir) / "queue.jsonl");
        auto pending = queue.pending();
        for (const auto& entry : pending) {
            std::printf("%s\n  %s\n", entry.entry_id.c_str(), entry.report.c_str());
        }
        std::printf("%zu pending entries\n", pending.size());
        return 0;
    }

    if (queue_resolve->parsed()) {
        auto queue = refscore::ManualQueue::load(
            std::filesystem::path(queue_resolve_dir) / "queue.jsonl");
        queue.resolve(queue_entry, queue_value, queue_note);
        std::printf("resolved %s = %s\n", queue_entry.c_str(),
                    refscore::format_number(queue_value).c_str());
        return 0;
    }

    if (analyze->parsed()) {
        auto result = refscore::analyze_run(analyze_dir);
        if (!result.complete()) {
            auto halted = result.halted_cells();
            std::fprintf(stderr, "still incomplete: ");
            for (std::size_t i = 0; i < halted.size(); ++i) {
                std::fprintf(stderr, "%s%s", i ? ", " : "", halted[i].c_str());
            }
            std::fprintf(stderr, "\n");
            return refscore::exit_code_for(ErrorCategory::Queue);
        }
        std::printf("analysis refreshed: %s\n", result.dir.c_str());
        return 0;
    }

    if (report->parsed()) {
        refscore::report_run(report_dir);
        std::printf("report written to %s/report\n", report_dir.c_str());
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return refscore::exit_code_for(e.category());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
