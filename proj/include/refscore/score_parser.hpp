#pragma once

#include <filesystem>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "refscore/types.hpp"

namespace refscore {

enum class ScoreKind { Overall, SubscoreAverage, RangeMidpoint, OrigSigAverage, Manual, Missing };

std::string to_string(ScoreKind kind);

// A parsed report score. Missing carries no value; sub-score averages are
// rounded half-up to exactly three decimal places.
struct ParsedScore {
    std::optional<double> value;
    ScoreKind kind = ScoreKind::Missing;
    std::string rule_id;
};

enum class RuleKind { Overall, SubscoreTriple, Range, OrigSig, Missing };

// One extraction rule. Overall/Range/Missing use `pattern`; the sub-score
// kinds use the per-dimension patterns instead.
struct Rule {
    std::string id;
    RuleKind kind = RuleKind::Overall;
    std::string pattern;
    std::string originality_pattern;
    std::string significance_pattern;
    std::string rigour_pattern;
};

// Ordered rule list; priority is list order, first match wins.
class RuleSet {
public:
    static RuleSet built_in();
    static RuleSet from_json(const std::string& json_text);
    static RuleSet from_file(const std::filesystem::path& path);

    const std::vector<Rule>& rules() const { return rules_; }
    std::string to_json() const;
    // Digest over the serialized rules; manifests record it to detect drift.
    std::string digest() const;

    struct CompiledRule {
        Rule rule;
        std::optional<std::regex> pattern;
        std::optional<std::regex> originality;
        std::optional<std::regex> significance;
        std::optional<std::regex> rigour;
    };
    const std::vector<CompiledRule>& compiled() const { return compiled_; }

private:
    explicit RuleSet(std::vector<Rule> rules);
    std::vector<Rule> rules_;
    std::vector<CompiledRule> compiled_;
};

// Applies rules in priority order. Returns a ParsedScore (possibly Missing)
// or nullopt when no rule matches or a matched value falls outside the
// 1..4 scale; such reports go to the manual queue, never silently dropped.
std::optional<ParsedScore> extract_score(const std::string& report, const RuleSet& rules);

// A report the rules could not resolve, waiting for a human score. cell
// names the experiment cell (view_strategy_model) the report came from, so
// one run-level queue can hold the same article/iteration twice.
struct QueueEntry {
    std::string entry_id;
    std::string cell;
    std::string article_id;
    int iteration = 0;
    std::string report;
    bool resolved = false;
    std::optional<double> value;
    std::string note;
};

// Manual-resolution queue persisted as JSONL: pending entries appended by
// the parser stage, resolution records appended by the CLI.
class ManualQueue {
public:
    ManualQueue() = default;
    static ManualQueue load(const std::filesystem::path& file);

    void bind_file(const std::filesystem::path& file);
    const std::filesystem::path& file() const { return file_; }

    std::string add(const std::string& cell, const std::string& article_id,
                    int iteration, const std::string& report);
    ParsedScore resolve(const std::string& entry_id, double value,
                        const std::string& note = {});

    std::vector<QueueEntry> entries() const;
    std::vector<QueueEntry> pending() const;
    std::optional<QueueEntry> find(const std::string& entry_id) const;
    bool empty() const { return entries_.empty(); }

private:
    std::filesystem::path file_;
    std::vector<QueueEntry> entries_;
    void append_line(const std::string& line);
};

}  // namespace refscore
