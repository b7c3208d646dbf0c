#include "refscore/experiment.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

#include "refscore/prompts.hpp"
#include "refscore/scorebook.hpp"
#include "refscore/util.hpp"

namespace refscore {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string sanitize_component(const std::string& text) {
    std::string out;
    for (char ch : text) {
        bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                  (ch >= '0' && ch <= '9') || ch == '.' || ch == '-';
        out += ok ? ch : '-';
    }
    return out.empty() ? std::string{"x"} : out;
}

std::filesystem::path resolve_path(const std::string& text,
                                   const std::filesystem::path& base_dir) {
    std::filesystem::path p(text);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    return p;
}

const char* kConfigKeys[] = {
    "corpus",  "views",    "strategies",   "models",      "iterations",
    "backend", "sampling", "seed",         "out",         "parallel",
    "confidence_level",    "round_scores", "leave_one_out",
    "mock",    "live",     "timestamp",    "rules",       "reference_headings"};

std::string timestamp_for(const ExperimentConfig& config) {
    return config.fixed_timestamp.empty() ? now_iso8601() : config.fixed_timestamp;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const std::string& json_text,
                                             const std::filesystem::path& base_dir) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::Config, "config unreadable: " + std::string(e.what()));
    }
    if (!doc.is_object()) {
        throw Error(ErrorCategory::Config, "config must be a JSON object");
    }
    for (const auto& [key, _] : doc.items()) {
        bool known = false;
        for (const char* k : kConfigKeys) {
            if (key == k) {
                known = true;
                break;
            }
        }
        if (!known) throw Error(ErrorCategory::Config, "unknown config key: " + key);
    }

    ExperimentConfig config;
    try {
        if (doc.contains("corpus")) {
            config.corpus_dir = resolve_path(doc["corpus"].get<std::string>(), base_dir);
        }
        if (doc.contains("out")) {
            config.out_dir = resolve_path(doc["out"].get<std::string>(), base_dir);
        }
        if (doc.contains("rules")) {
            auto text = doc["rules"].get<std::string>();
            if (!text.empty()) config.rules_file = resolve_path(text, base_dir);
        }
        if (doc.contains("views")) {
            config.views.clear();
            for (const auto& v : doc["views"]) {
                config.views.push_back(parse_view_kind(v.get<std::string>()));
            }
        }
        if (doc.contains("strategies")) {
            config.strategies.clear();
            for (const auto& s : doc["strategies"]) {
                config.strategies.push_back(parse_strategy_id(s.get<std::string>()));
            }
        }
        if (doc.contains("models")) {
            config.models = doc["models"].get<std::vector<std::string>>();
        }
        if (doc.contains("iterations")) config.iterations = doc["iterations"].get<int>();
        if (doc.contains("backend")) {
            config.backend = parse_backend_kind(doc["backend"].get<std::string>());
        }
        if (doc.contains("sampling")) {
            const auto& s = doc["sampling"];
            config.sampling.temperature = s.value("temperature", config.sampling.temperature);
            config.sampling.top_p = s.value("top_p", config.sampling.top_p);
            config.sampling.max_tokens = s.value("max_tokens", config.sampling.max_tokens);
        }
        if (doc.contains("seed")) config.seed = doc["seed"].get<std::uint64_t>();
        if (doc.contains("parallel")) config.parallel = doc["parallel"].get<int>();
        if (doc.contains("confidence_level")) {
            config.confidence_level = doc["confidence_level"].get<double>();
        }
        if (doc.contains("round_scores")) {
            config.round_scores = doc["round_scores"].get<bool>();
        }
        if (doc.contains("leave_one_out")) {
            config.leave_one_out = doc["leave_one_out"].get<bool>();
        }
        if (doc.contains("mock")) {
            const auto& m = doc["mock"];
            config.mock.refusal_prob = m.value("refusal_prob", config.mock.refusal_prob);
            config.mock.title_refusal_prob =
                m.value("title_refusal_prob", config.mock.title_refusal_prob);
            config.mock.noise_sd = m.value("noise_sd", config.mock.noise_sd);
        }
        if (doc.contains("live")) {
            const auto& l = doc["live"];
            config.live.url = l.value("url", config.live.url);
            config.live.credential_env = l.value("credential_env", config.live.credential_env);
            config.live.max_attempts = l.value("max_attempts", config.live.max_attempts);
            config.live.timeout_seconds =
                l.value("timeout_seconds", config.live.timeout_seconds);
        }
        if (doc.contains("timestamp")) {
            config.fixed_timestamp = doc["timestamp"].get<std::string>();
        }
        if (doc.contains("reference_headings")) {
            config.view_options.reference_headings =
                doc["reference_headings"].get<std::vector<std::string>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::Config, "config field malformed: " + std::string(e.what()));
    }
    return config;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::filesystem::path& path) {
    return from_json(read_file(path), std::filesystem::absolute(path).parent_path());
}

std::string ExperimentConfig::to_json() const {
    ordered_json doc;
    doc["corpus"] = corpus_dir.generic_string();
    auto views_json = ordered_json::array();
    for (auto v : views) views_json.push_back(to_string(v));
    doc["views"] = std::move(views_json);
    auto strategies_json = ordered_json::array();
    for (auto s : strategies) strategies_json.push_back(to_string(s));
    doc["strategies"] = std::move(strategies_json);
    doc["models"] = models;
    doc["iterations"] = iterations;
    doc["backend"] = to_string(backend);
    doc["sampling"] = {{"temperature", sampling.temperature},
                       {"top_p", sampling.top_p},
                       {"max_tokens", sampling.max_tokens}};
    doc["seed"] = seed;
    doc["out"] = out_dir.generic_string();
    doc["parallel"] = parallel;
    doc["confidence_level"] = confidence_level;
    doc["round_scores"] = round_scores;
    doc["leave_one_out"] = leave_one_out;
    doc["mock"] = {{"refusal_prob", mock.refusal_prob},
                   {"title_refusal_prob", mock.title_refusal_prob},
                   {"noise_sd", mock.noise_sd}};
    doc["live"] = {{"url", live.url},
                   {"credential_env", live.credential_env},
                   {"max_attempts", live.max_attempts},
                   {"timeout_seconds", live.timeout_seconds}};
    doc["timestamp"] = fixed_timestamp;
    doc["rules"] = rules_file.generic_string();
    doc["reference_headings"] = view_options.reference_headings;
    return doc.dump(2) + "\n";
}

void ExperimentConfig::validate() const {
    if (corpus_dir.empty()) {
        throw Error(ErrorCategory::Config, "config needs a corpus path");
    }
    if (out_dir.empty()) {
        throw Error(ErrorCategory::Config, "config needs an output directory");
    }
    if (views.empty()) throw Error(ErrorCategory::Config, "config needs at least one view");
    if (strategies.empty()) {
        throw Error(ErrorCategory::Config, "config needs at least one strategy");
    }
    if (models.empty()) throw Error(ErrorCategory::Config, "config needs at least one model");
    if (iterations < 1) throw Error(ErrorCategory::Config, "iterations must be >= 1");
    if (parallel < 1) throw Error(ErrorCategory::Config, "parallel must be >= 1");
    if (!(confidence_level > 0.0 && confidence_level < 1.0)) {
        throw Error(ErrorCategory::Config, "confidence level must be in (0,1)");
    }
    if (sampling.max_tokens < 1) {
        throw Error(ErrorCategory::Config, "max_tokens must be >= 1");
    }
    if (sampling.temperature < 0.0) {
        throw Error(ErrorCategory::Config, "temperature must be >= 0");
    }
    if (!(sampling.top_p > 0.0 && sampling.top_p <= 1.0)) {
        throw Error(ErrorCategory::Config, "top_p must be in (0,1]");
    }
    std::set<std::string> seen_cells;
    for (auto v : views) {
        for (auto s : strategies) {
            for (const auto& m : models) {
                CellSpec spec{v, s, m};
                if (!seen_cells.insert(spec.name()).second) {
                    throw Error(ErrorCategory::Config,
                                "duplicate experiment cell: " + spec.name());
                }
            }
        }
    }
}

std::string CellSpec::name() const {
    return to_string(view) + "_" + to_string(strategy) + "_" + sanitize_component(model);
}

bool RunResult::complete() const {
    return std::all_of(cells.begin(), cells.end(),
                       [](const CellStatus& c) { return c.completed; });
}

std::vector<std::string> RunResult::halted_cells() const {
    std::vector<std::string> out;
    for (const auto& cell : cells) {
        if (!cell.completed) out.push_back(cell.spec.name());
    }
    return out;
}

namespace {

std::vector<CellSpec> grid_of(const ExperimentConfig& config) {
    std::vector<CellSpec> cells;
    for (auto v : config.views) {
        for (auto s : config.strategies) {
            for (const auto& m : config.models) {
                cells.push_back(CellSpec{v, s, m});
            }
        }
    }
    return cells;
}

CellStatus process_cell(const ExperimentConfig& config, const Corpus& corpus,
                        const CellSpec& cell, Backend& backend, const RuleSet& rules,
                        ManualQueue& queue) {
    CellStatus status;
    status.spec = cell;
    const auto cell_name = cell.name();

    std::vector<std::string> ids;
    std::vector<double> human;
    for (const auto& article : corpus.articles) {
        ids.push_back(article.id);
        human.push_back(article.human_score);
    }

    std::vector<ScoredIteration> scored;
    for (const auto& article : corpus.articles) {
        auto reports = run_iterations(article, cell.view, cell.strategy, cell.model,
                                      config.iterations, backend, config.sampling,
                                      config.view_options, config.parallel);
        for (int iter = 0; iter < config.iterations; ++iter) {
            const auto& report = reports[static_cast<std::size_t>(iter)];
            auto parsed = extract_score(report, rules);
            if (parsed) {
                scored.push_back({article.id, iter, *parsed});
                continue;
            }
            auto entry_id = cell_name + "/" + article.id + "#" + std::to_string(iter);
            auto existing = queue.find(entry_id);
            if (!existing) {
                queue.add(cell_name, article.id, iter, report);
                status.pending_entries.push_back(entry_id);
            } else if (existing->resolved) {
                scored.push_back(
                    {article.id, iter, ParsedScore{existing->value, ScoreKind::Manual,
                                                   "manual"}});
            } else {
                status.pending_entries.push_back(entry_id);
            }
        }
    }

    if (!status.pending_entries.empty()) return status;

    auto matrix = build_matrix(ids, human, config.iterations, scored, queue, cell_name);
    auto cell_dir = config.out_dir / "cells" / cell_name;
    std::filesystem::create_directories(cell_dir);
    write_matrix_csv(matrix, cell_dir / "matrix.csv");

    CurveOptions curve_options;
    curve_options.confidence_level = config.confidence_level;
    auto curve = correlation_curve(matrix, config.seed, curve_options);
    write_curve_csv(curve, cell_dir / "curve.csv");
    status.full_correlation = curve.points.back().mean;

    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t row = 0; row < matrix.article_count(); ++row) {
        auto mean = mean_all(matrix, row);
        if (!mean) continue;
        xs.push_back(*mean);
        ys.push_back(matrix.human[row]);
    }
    if (xs.size() >= 3) {
        Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
        Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
        OlsOptions ols_options;
        ols_options.leave_one_out = config.leave_one_out;
        ols_options.round_predictions = config.round_scores;
        try {
            status.calibration = ols_fit(x, y, ols_options);
        } catch (const Error&) {
            // Degenerate cell (constant predictions); no calibration row.
        }
    }

    status.completed = true;
    return status;
}

void write_run_calibration(const ExperimentConfig& config,
                           const std::vector<CellStatus>& cells) {
    std::vector<std::pair<std::string, CalibrationModel>> rows;
    for (const auto& cell : cells) {
        if (cell.calibration) rows.emplace_back(cell.spec.name(), *cell.calibration);
    }
    write_calibration_csv(rows, config.out_dir / "calibration.csv");
}

void write_manifest(const ExperimentConfig& config, const Corpus& corpus,
                    const RuleSet& rules, const std::vector<CellStatus>& cells,
                    const std::string& created, const std::string& finished) {
    ordered_json doc;
    doc["kind"] = "run_manifest";
    doc["created"] = created;
    doc["finished"] = finished;
    doc["seed"] = config.seed;
    doc["backend"] = to_string(config.backend);
    doc["cache_file"] = "cache.jsonl";
    doc["queue_file"] = "queue.jsonl";
    doc["config"] = nlohmann::ordered_json::parse(config.to_json());

    ordered_json digests;
    for (auto strategy : config.strategies) {
        digests[to_string(strategy)] = fnv1a64_hex(system_prompt(strategy));
    }
    doc["prompt_digests"] = std::move(digests);
    doc["user_prompt_prefix_digest"] = fnv1a64_hex(kUserPromptPrefix);
    doc["rules_digest"] = rules.digest();

    ordered_json corpus_json;
    corpus_json["articles"] = corpus.articles.size();
    corpus_json["metadata"] = corpus.metadata;
    doc["corpus"] = std::move(corpus_json);

    auto cells_json = ordered_json::array();
    for (const auto& cell : cells) {
        ordered_json c;
        c["name"] = cell.spec.name();
        c["view"] = to_string(cell.spec.view);
        c["strategy"] = to_string(cell.spec.strategy);
        c["model"] = cell.spec.model;
        c["status"] = cell.completed ? "completed" : "pending-queue";
        c["pending"] = cell.pending_entries;
        if (cell.full_correlation) c["full_correlation"] = *cell.full_correlation;
        cells_json.push_back(std::move(c));
    }
    doc["cells"] = std::move(cells_json);

    write_file_atomic(config.out_dir / "manifest.json", doc.dump(2) + "\n");
}

RunResult run_cells(const ExperimentConfig& config, const Corpus& corpus,
                    Backend& backend, const RuleSet& rules, ManualQueue& queue,
                    const std::string& created) {
    RunResult result;
    result.dir = config.out_dir;
    for (const auto& cell : grid_of(config)) {
        result.cells.push_back(process_cell(config, corpus, cell, backend, rules, queue));
    }
    write_run_calibration(config, result.cells);
    write_manifest(config, corpus, rules, result.cells, created, timestamp_for(config));
    return result;
}

RuleSet load_rules(const ExperimentConfig& config) {
    return config.rules_file.empty() ? RuleSet::built_in()
                                     : RuleSet::from_file(config.rules_file);
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    auto corpus = load_corpus(config.corpus_dir);
    validate_corpus(corpus);

    std::filesystem::create_directories(config.out_dir);
    auto cache = CompletionCache::load(config.out_dir / "cache.jsonl");
    auto queue = ManualQueue::load(config.out_dir / "queue.jsonl");
    auto rules = load_rules(config);

    Backend backend;
    backend.kind = config.backend;
    backend.mock = config.mock;
    backend.live = config.live;
    backend.seed = config.seed;
    backend.cache = &cache;
    backend.fixed_timestamp = config.fixed_timestamp;

    return run_cells(config, corpus, backend, rules, queue, timestamp_for(config));
}

RunResult analyze_run(const std::filesystem::path& run_dir) {
    auto manifest_path = run_dir / "manifest.json";
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::Analysis,
                    "manifest unreadable: " + std::string(e.what()));
    }

    auto config = ExperimentConfig::from_json(manifest.at("config").dump());
    config.out_dir = run_dir;
    auto corpus = load_corpus(config.corpus_dir);
    validate_corpus(corpus);

    auto rules = load_rules(config);
    if (manifest.contains("rules_digest") &&
        manifest["rules_digest"].get<std::string>() != rules.digest()) {
        throw Error(ErrorCategory::Analysis,
                    "parser rules drifted since the run was recorded");
    }
    if (manifest.contains("prompt_digests")) {
        for (auto strategy : config.strategies) {
            auto name = to_string(strategy);
            auto recorded = manifest["prompt_digests"].value(name, std::string{});
            if (!recorded.empty() && recorded != fnv1a64_hex(system_prompt(strategy))) {
                throw Error(ErrorCategory::Analysis,
                            "prompt text drifted for strategy " + name);
            }
        }
    }

    auto cache = CompletionCache::load(run_dir / "cache.jsonl");
    auto queue = ManualQueue::load(run_dir / "queue.jsonl");

    Backend backend;
    backend.kind = BackendKind::Replay;
    backend.seed = config.seed;
    backend.cache = &cache;
    backend.fixed_timestamp = config.fixed_timestamp;

    auto created = manifest.value("created", timestamp_for(config));
    return run_cells(config, corpus, backend, rules, queue, created);
}

namespace {

double pairwise_spearman(const std::vector<std::optional<double>>& a,
                         const std::vector<std::optional<double>>& b) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i] || !b[i]) continue;
        xs.push_back(*a[i]);
        ys.push_back(*b[i]);
    }
    Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
    Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
    return spearman(x, y);
}

}  // namespace

void report_run(const std::filesystem::path& run_dir) {
    auto manifest_path = run_dir / "manifest.json";
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::Analysis,
                    "manifest unreadable: " + std::string(e.what()));
    }

    std::vector<std::string> incomplete;
    std::vector<std::string> cell_names;
    for (const auto& cell : manifest.at("cells")) {
        auto name = cell.at("name").get<std::string>();
        cell_names.push_back(name);
        if (cell.at("status").get<std::string>() != "completed") {
            incomplete.push_back(name);
        }
    }
    if (cell_names.empty()) {
        throw Error(ErrorCategory::Analysis, "run has no cells to report");
    }
    if (!incomplete.empty()) {
        throw Error(ErrorCategory::Queue,
                    "run incomplete; unresolved cells: " + join(incomplete, ", "));
    }

    auto report_dir = run_dir / "report";
    std::filesystem::create_directories(report_dir);

    std::vector<ScoreMatrix> matrices;
    std::string combined_curves = "cell,k,mean,sd,ci_low,ci_high,samples,excluded\n";
    for (const auto& name : cell_names) {
        auto cell_dir = run_dir / "cells" / name;
        matrices.push_back(matrix_from_csv(read_file(cell_dir / "matrix.csv")));
        auto curve_lines = split_lines(read_file(cell_dir / "curve.csv"));
        for (std::size_t i = 1; i < curve_lines.size(); ++i) {
            if (trim(curve_lines[i]).empty()) continue;
            combined_curves += name + "," + curve_lines[i] + "\n";
        }
    }
    write_file_atomic(report_dir / "curves.csv", combined_curves);

    const auto& first = matrices.front();
    for (const auto& matrix : matrices) {
        if (matrix.article_ids != first.article_ids) {
            throw Error(ErrorCategory::Analysis,
                        "cells disagree on the article set; cannot cross-correlate");
        }
    }

    // Per-cell average score vectors, plus human as the last column.
    std::vector<std::vector<std::optional<double>>> columns;
    std::vector<std::string> labels = cell_names;
    for (const auto& matrix : matrices) {
        std::vector<std::optional<double>> column;
        for (std::size_t row = 0; row < matrix.article_count(); ++row) {
            column.push_back(mean_all(matrix, row));
        }
        columns.push_back(std::move(column));
    }
    std::vector<std::optional<double>> human_column;
    for (double h : first.human) human_column.emplace_back(h);
    columns.push_back(std::move(human_column));
    labels.push_back("human");

    std::string correlations = "cell";
    for (const auto& label : labels) correlations += "," + label;
    correlations += "\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        correlations += labels[i];
        for (std::size_t j = 0; j < labels.size(); ++j) {
            correlations += ",";
            if (i == j) {
                correlations += "1";
                continue;
            }
            try {
                correlations += format_number(pairwise_spearman(columns[i], columns[j]));
            } catch (const Error&) {
                // Undefined pair (too few shared articles or constant ranks).
            }
        }
        correlations += "\n";
    }
    write_file_atomic(report_dir / "correlations.csv", correlations);

    std::string means = "cell,mean_score\n";
    for (std::size_t i = 0; i < matrices.size(); ++i) {
        double sum = 0.0;
        int count = 0;
        for (const auto& row : matrices[i].cells) {
            for (const auto& cell : row) {
                if (!cell) continue;
                sum += *cell;
                ++count;
            }
        }
        means += cell_names[i] + ",";
        means += count ? format_number(sum / count) : std::string{};
        means += "\n";
    }
    double human_sum = 0.0;
    for (double h : first.human) human_sum += h;
    means += "human," + format_number(human_sum / static_cast<double>(first.human.size())) + "\n";
    write_file_atomic(report_dir / "means.csv", means);

    auto calibration_path = run_dir / "calibration.csv";
    if (std::filesystem::exists(calibration_path)) {
        write_file_atomic(report_dir / "calibration.csv", read_file(calibration_path));
    }

    std::string summary;
    summary += "run: " + run_dir.string() + "\n";
    summary += "backend: " + manifest.value("backend", std::string{"?"}) + "\n";
    summary += "articles: " +
               std::to_string(manifest.at("corpus").at("articles").get<std::size_t>()) + "\n";
    summary += "iterations: " +
               std::to_string(manifest.at("config").at("iterations").get<int>()) + "\n";
    summary += "cells:\n";
    for (const auto& cell : manifest.at("cells")) {
        summary += "  " + cell.at("name").get<std::string>();
        if (cell.contains("full_correlation")) {
            summary += "  rank correlation (all iterations) = " +
                       format_number(cell.at("full_correlation").get<double>());
        }
        summary += "\n";
    }
    summary +=
        "files: curves.csv, correlations.csv, means.csv, calibration.csv "
        "(plot-ready CSV)\n";
    write_file_atomic(report_dir / "summary.txt", summary);
}

}  // namespace refscore
