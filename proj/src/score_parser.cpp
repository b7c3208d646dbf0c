#include "refscore/score_parser.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "refscore/util.hpp"

namespace refscore {

namespace {

using ordered_json = nlohmann::ordered_json;

// Default rule inventory, kept as JSON so the built-in set and user rule
// files go through the same loader. Order is priority: overall scores,
// then sub-score triples, ranges, originality+significance, refusals.
const char* kBuiltInRules = R"JSON({
  "rules": [
    {
      "id": "overall-colon",
      "kind": "overall",
      "pattern": "overall(?:\\s+score|\\s+rating|\\s+quality|\\s+assessment)?\\s*\\*{0,2}\"?\\s*[:=]\\s*\"?\\s*\\*{0,2}\\s*([0-9](?:\\.[0-9]+)?)"
    },
    {
      "id": "overall-assigned",
      "kind": "overall",
      "pattern": "(?:assigned|awarded|given|earns|merits|deserves|receives|warrants)\\s+(?:a\\s+|an\\s+)?(?:overall\\s+)?(?:score|rating|grade)?\\s*(?:of\\s+)?\\s*([0-9](?:\\.[0-9]+)?)\\s*(?:\\*|[-\\s]stars?)"
    },
    {
      "id": "overall-star-noun",
      "kind": "overall",
      "pattern": "\\ba\\s+([0-9](?:\\.[0-9]+)?)[-\\s]stars?\\b"
    },
    {
      "id": "overall-score-colon",
      "kind": "overall",
      "pattern": "\\bscore\\s*[:=]\\s*\"?\\s*([0-9](?:\\.[0-9]+)?)"
    },
    {
      "id": "subscore-triple",
      "kind": "subscore_triple",
      "originality": "originality[^0-9\\n.]{0,30}([0-9](?:\\.[0-9]+)?)\\s*(?:\\*|[-\\s]stars?)",
      "significance": "significance[^0-9\\n.]{0,30}([0-9](?:\\.[0-9]+)?)\\s*(?:\\*|[-\\s]stars?)",
      "rigour": "rigou?r[^0-9\\n.]{0,30}([0-9](?:\\.[0-9]+)?)\\s*(?:\\*|[-\\s]stars?)"
    },
    {
      "id": "range-between",
      "kind": "range",
      "pattern": "between\\s+([0-9](?:\\.[0-9]+)?)\\s*\\*?\\s*and\\s+([0-9](?:\\.[0-9]+)?)\\s*\\*"
    },
    {
      "id": "range-to",
      "kind": "range",
      "pattern": "\\b([0-9](?:\\.[0-9]+)?)\\s*\\*?\\s*(?:to|through|\\u2013|\\u2014|-)\\s*([0-9](?:\\.[0-9]+)?)\\s*\\*"
    },
    {
      "id": "orig-sig",
      "kind": "orig_sig",
      "originality": "originality[^0-9\\n.]{0,30}([0-9](?:\\.[0-9]+)?)\\s*(?:\\*|[-\\s]stars?)",
      "significance": "significance[^0-9\\n.]{0,30}([0-9](?:\\.[0-9]+)?)\\s*(?:\\*|[-\\s]stars?)"
    },
    {
      "id": "refusal-insufficient",
      "kind": "missing",
      "pattern": "insufficient\\s+information"
    },
    {
      "id": "refusal-impossible",
      "kind": "missing",
      "pattern": "impossible\\s+to\\s+(?:evaluate|assess|judge|score)"
    },
    {
      "id": "refusal-unable",
      "kind": "missing",
      "pattern": "unable\\s+to\\s+(?:evaluate|assess|judge|score|make\\s+a\\s+judge?ment|provide\\s+a\\s+score)"
    },
    {
      "id": "refusal-cannot",
      "kind": "missing",
      "pattern": "cannot\\s+(?:be\\s+)?(?:evaluated?|assess(?:ed)?|judged?|scored?|provide\\s+a\\s+score)"
    },
    {
      "id": "refusal-no-score",
      "kind": "missing",
      "pattern": "no\\s+score\\s+(?:can\\s+be|is|will\\s+be)\\s+(?:given|provided|assigned)"
    }
  ]
})JSON";

constexpr double kScaleMin = 1.0;
constexpr double kScaleMax = 4.0;

bool in_scale(double v) { return v >= kScaleMin && v <= kScaleMax; }

RuleKind parse_rule_kind(const std::string& text) {
    if (text == "overall") return RuleKind::Overall;
    if (text == "subscore_triple") return RuleKind::SubscoreTriple;
    if (text == "range") return RuleKind::Range;
    if (text == "orig_sig") return RuleKind::OrigSig;
    if (text == "missing") return RuleKind::Missing;
    throw Error(ErrorCategory::Config, "unknown rule kind: " + text);
}

std::string rule_kind_name(RuleKind kind) {
    switch (kind) {
        case RuleKind::Overall: return "overall";
        case RuleKind::SubscoreTriple: return "subscore_triple";
        case RuleKind::Range: return "range";
        case RuleKind::OrigSig: return "orig_sig";
        case RuleKind::Missing: return "missing";
    }
    return "unknown";
}

std::regex compile(const std::string& pattern, const std::string& rule_id) {
    try {
        return std::regex(pattern, std::regex::icase | std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
        throw Error(ErrorCategory::Config,
                    "rule '" + rule_id + "' has invalid pattern: " + e.what());
    }
}

std::optional<double> search_value(const std::optional<std::regex>& re,
                                   const std::string& report) {
    if (!re) return std::nullopt;
    std::smatch m;
    if (!std::regex_search(report, m, *re)) return std::nullopt;
    return std::stod(m[1].str());
}

struct RangeMatch {
    double low;
    double high;
};

std::optional<RangeMatch> search_range(const std::optional<std::regex>& re,
                                       const std::string& report) {
    if (!re) return std::nullopt;
    std::smatch m;
    if (!std::regex_search(report, m, *re)) return std::nullopt;
    return RangeMatch{std::stod(m[1].str()), std::stod(m[2].str())};
}

}  // namespace

std::string to_string(ScoreKind kind) {
    switch (kind) {
        case ScoreKind::Overall: return "overall";
        case ScoreKind::SubscoreAverage: return "subscore_average";
        case ScoreKind::RangeMidpoint: return "range_midpoint";
        case ScoreKind::OrigSigAverage: return "orig_sig_average";
        case ScoreKind::Manual: return "manual";
        case ScoreKind::Missing: return "missing";
    }
    return "unknown";
}

RuleSet::RuleSet(std::vector<Rule> rules) : rules_(std::move(rules)) {
    if (rules_.empty()) {
        throw Error(ErrorCategory::Config, "rule set is empty");
    }
    std::set<std::string> ids;
    for (const auto& rule : rules_) {
        if (rule.id.empty()) {
            throw Error(ErrorCategory::Config, "rule without id");
        }
        if (!ids.insert(rule.id).second) {
            throw Error(ErrorCategory::Config, "duplicate rule id: " + rule.id);
        }
        CompiledRule compiled_rule;
        compiled_rule.rule = rule;
        switch (rule.kind) {
            case RuleKind::Overall:
            case RuleKind::Range:
            case RuleKind::Missing:
                if (rule.pattern.empty()) {
                    throw Error(ErrorCategory::Config,
                                "rule '" + rule.id + "' requires a pattern");
                }
                compiled_rule.pattern = compile(rule.pattern, rule.id);
                break;
            case RuleKind::SubscoreTriple:
                compiled_rule.rigour = compile(rule.rigour_pattern, rule.id);
                [[fallthrough]];
            case RuleKind::OrigSig:
                compiled_rule.originality = compile(rule.originality_pattern, rule.id);
                compiled_rule.significance = compile(rule.significance_pattern, rule.id);
                break;
        }
        compiled_.push_back(std::move(compiled_rule));
    }
}

RuleSet RuleSet::built_in() { return from_json(kBuiltInRules); }

RuleSet RuleSet::from_json(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::Config, "rules file unreadable: " + std::string(e.what()));
    }
    std::vector<Rule> rules;
    for (const auto& r : doc.at("rules")) {
        Rule rule;
        rule.id = r.at("id").get<std::string>();
        rule.kind = parse_rule_kind(r.at("kind").get<std::string>());
        rule.pattern = r.value("pattern", std::string{});
        rule.originality_pattern = r.value("originality", std::string{});
        rule.significance_pattern = r.value("significance", std::string{});
        rule.rigour_pattern = r.value("rigour", std::string{});
        rules.push_back(std::move(rule));
    }
    return RuleSet(std::move(rules));
}

RuleSet RuleSet::from_file(const std::filesystem::path& path) {
    return from_json(read_file(path));
}

std::string RuleSet::to_json() const {
    ordered_json doc;
    auto arr = ordered_json::array();
    for (const auto& rule : rules_) {
        ordered_json r;
        r["id"] = rule.id;
        r["kind"] = rule_kind_name(rule.kind);
        if (!rule.pattern.empty()) r["pattern"] = rule.pattern;
        if (!rule.originality_pattern.empty()) r["originality"] = rule.originality_pattern;
        if (!rule.significance_pattern.empty()) r["significance"] = rule.significance_pattern;
        if (!rule.rigour_pattern.empty()) r["rigour"] = rule.rigour_pattern;
        arr.push_back(std::move(r));
    }
    doc["rules"] = std::move(arr);
    return doc.dump(2) + "\n";
}

std::string RuleSet::digest() const { return fnv1a64_hex(to_json()); }

std::optional<ParsedScore> extract_score(const std::string& report, const RuleSet& rules) {
    if (trim(report).empty()) {
        throw Error(ErrorCategory::Analysis, "cannot extract a score from an empty report");
    }

    for (const auto& c : rules.compiled()) {
        switch (c.rule.kind) {
            case RuleKind::Overall: {
                auto value = search_value(c.pattern, report);
                if (!value) break;
                // Out-of-scale values ("5*") are never clamped; the report
                // goes to manual resolution instead.
                if (!in_scale(*value)) return std::nullopt;
                return ParsedScore{*value, ScoreKind::Overall, c.rule.id};
            }
            case RuleKind::SubscoreTriple: {
                auto orig = search_value(c.originality, report);
                auto sig = search_value(c.significance, report);
                auto rig = search_value(c.rigour, report);
                if (!orig || !sig || !rig) break;
                if (!in_scale(*orig) || !in_scale(*sig) || !in_scale(*rig)) {
                    return std::nullopt;
                }
                double mean = round_half_up((*orig + *sig + *rig) / 3.0, 3);
                return ParsedScore{mean, ScoreKind::SubscoreAverage, c.rule.id};
            }
            case RuleKind::Range: {
                auto range = search_range(c.pattern, report);
                if (!range) break;
                if (!in_scale(range->low) || !in_scale(range->high) ||
                    range->low > range->high) {
                    return std::nullopt;
                }
                double midpoint = (range->low + range->high) / 2.0;
                return ParsedScore{midpoint, ScoreKind::RangeMidpoint, c.rule.id};
            }
            case RuleKind::OrigSig: {
                auto orig = search_value(c.originality, report);
                auto sig = search_value(c.significance, report);
                if (!orig || !sig) break;
                if (!in_scale(*orig) || !in_scale(*sig)) return std::nullopt;
                double mean = round_half_up((*orig + *sig) / 2.0, 3);
                return ParsedScore{mean, ScoreKind::OrigSigAverage, c.rule.id};
            }
            case RuleKind::Missing: {
                std::smatch m;
                if (!std::regex_search(report, m, *c.pattern)) break;
                return ParsedScore{std::nullopt, ScoreKind::Missing, c.rule.id};
            }
        }
    }
    return std::nullopt;
}

ManualQueue ManualQueue::load(const std::filesystem::path& file) {
    ManualQueue queue;
    queue.file_ = file;
    if (!std::filesystem::exists(file)) return queue;

    for (const auto& line : split_lines(read_file(file))) {
        if (trim(line).empty()) continue;
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCategory::Queue,
                        "corrupt queue line in " + file.string() + ": " + e.what());
        }
        auto type = doc.at("type").get<std::string>();
        if (type == "pending") {
            QueueEntry entry;
            entry.entry_id = doc.at("entry_id").get<std::string>();
            entry.cell = doc.value("cell", std::string{});
            entry.article_id = doc.at("article_id").get<std::string>();
            entry.iteration = doc.at("iteration").get<int>();
            entry.report = doc.at("report").get<std::string>();
            queue.entries_.push_back(std::move(entry));
        } else if (type == "resolved") {
            auto entry_id = doc.at("entry_id").get<std::string>();
            bool found = false;
            for (auto& entry : queue.entries_) {
                if (entry.entry_id == entry_id) {
                    entry.resolved = true;
                    entry.value = doc.at("value").get<double>();
                    entry.note = doc.value("note", std::string{});
                    found = true;
                    break;
                }
            }
            if (!found) {
                throw Error(ErrorCategory::Queue,
                            "resolution for unknown queue entry: " + entry_id);
            }
        } else {
            throw Error(ErrorCategory::Queue, "unknown queue record type: " + type);
        }
    }
    return queue;
}

void ManualQueue::bind_file(const std::filesystem::path& file) { file_ = file; }

void ManualQueue::append_line(const std::string& line) {
    if (file_.empty()) return;
    auto parent = file_.parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(file_, std::ios::binary | std::ios::app);
    if (!out) {
        throw Error(ErrorCategory::Queue, "cannot append to queue " + file_.string());
    }
    out << line << '\n';
}

std::string ManualQueue::add(const std::string& cell, const std::string& article_id,
                             int iteration, const std::string& report) {
    auto entry_id = article_id + "#" + std::to_string(iteration);
    if (!cell.empty()) entry_id = cell + "/" + entry_id;
    if (find(entry_id)) {
        throw Error(ErrorCategory::Queue, "queue already holds entry " + entry_id);
    }
    QueueEntry entry;
    entry.entry_id = entry_id;
    entry.cell = cell;
    entry.article_id = article_id;
    entry.iteration = iteration;
    entry.report = report;
    entries_.push_back(entry);

    ordered_json doc;
    doc["type"] = "pending";
    doc["entry_id"] = entry_id;
    doc["cell"] = cell;
    doc["article_id"] = article_id;
    doc["iteration"] = iteration;
    doc["report"] = report;
    append_line(doc.dump());
    return entry_id;
}

ParsedScore ManualQueue::resolve(const std::string& entry_id, double value,
                                 const std::string& note) {
    if (value < kScaleMin || value > kScaleMax) {
        throw Error(ErrorCategory::Queue,
                    "manual score " + format_number(value) + " out of [1,4]");
    }
    for (auto& entry : entries_) {
        if (entry.entry_id != entry_id) continue;
        if (entry.resolved) {
            throw Error(ErrorCategory::Queue, "entry already resolved: " + entry_id);
        }
        entry.resolved = true;
        entry.value = value;
        entry.note = note;

        ordered_json doc;
        doc["type"] = "resolved";
        doc["entry_id"] = entry_id;
        doc["value"] = value;
        doc["note"] = note;
        doc["resolved_at"] = now_iso8601();
        append_line(doc.dump());
        return ParsedScore{value, ScoreKind::Manual, "manual"};
    }
    throw Error(ErrorCategory::Queue, "no such queue entry: " + entry_id);
}

std::vector<QueueEntry> ManualQueue::entries() const { return entries_; }

std::vector<QueueEntry> ManualQueue::pending() const {
    std::vector<QueueEntry> out;
    for (const auto& entry : entries_) {
        if (!entry.resolved) out.push_back(entry);
    }
    return out;
}

std::optional<QueueEntry> ManualQueue::find(const std::string& entry_id) const {
    for (const auto& entry : entries_) {
        if (entry.entry_id == entry_id) return entry;
    }
    return std::nullopt;
}

}  // namespace refscore
