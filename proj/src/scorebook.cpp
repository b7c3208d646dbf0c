#include "refscore/scorebook.hpp"

#include <map>
#include <set>
#include <sstream>

#include "refscore/util.hpp"

namespace refscore {

namespace {

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

// One CSV field; scores never contain commas or quotes but article ids and
// the header may.
std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\n") == std::string::npos) return text;
    std::string quoted = "\"";
    for (char ch : text) {
        if (ch == '"') quoted += '"';
        quoted += ch;
    }
    quoted += '"';
    return quoted;
}

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(field);
            field.clear();
        } else {
            field += ch;
        }
    }
    fields.push_back(field);
    return fields;
}

}  // namespace

std::optional<std::size_t> ScoreMatrix::row_of(const std::string& article_id) const {
    for (std::size_t i = 0; i < article_ids.size(); ++i) {
        if (article_ids[i] == article_id) return i;
    }
    return std::nullopt;
}

ScoreMatrix build_matrix(const std::vector<std::string>& article_ids,
                         const std::vector<double>& human_scores,
                         int iterations,
                         const std::vector<ScoredIteration>& scored,
                         const ManualQueue& queue,
                         const std::string& cell) {
    if (article_ids.empty()) {
        throw Error(ErrorCategory::Analysis, "score matrix needs at least one article");
    }
    if (human_scores.size() != article_ids.size()) {
        throw Error(ErrorCategory::Analysis,
                    "human score count does not match article count");
    }
    if (iterations < 1) {
        throw Error(ErrorCategory::Analysis, "score matrix needs at least one iteration");
    }

    std::map<std::string, std::size_t> row_index;
    for (std::size_t i = 0; i < article_ids.size(); ++i) {
        if (!row_index.emplace(article_ids[i], i).second) {
            throw Error(ErrorCategory::Analysis, "duplicate article id: " + article_ids[i]);
        }
    }

    std::vector<std::string> blockers;
    for (const auto& entry : queue.pending()) {
        if (entry.cell != cell) continue;
        if (!row_index.count(entry.article_id)) continue;
        if (entry.iteration < 0 || entry.iteration >= iterations) continue;
        blockers.push_back(entry.article_id + "#" + std::to_string(entry.iteration));
    }
    if (!blockers.empty()) {
        throw Error(ErrorCategory::Queue,
                    "unresolved manual queue entries: " + join(blockers, ", "));
    }

    ScoreMatrix matrix;
    matrix.article_ids = article_ids;
    matrix.human = human_scores;
    matrix.iterations = iterations;
    matrix.cells.assign(article_ids.size(),
                        std::vector<std::optional<double>>(iterations));

    std::set<std::pair<std::size_t, int>> filled;
    for (const auto& item : scored) {
        auto row = row_index.find(item.article_id);
        if (row == row_index.end()) {
            throw Error(ErrorCategory::Analysis,
                        "score for unknown article: " + item.article_id);
        }
        if (item.iteration < 0 || item.iteration >= iterations) {
            throw Error(ErrorCategory::Analysis,
                        "iteration out of range: " + item.article_id + "#" +
                            std::to_string(item.iteration));
        }
        if (!filled.emplace(row->second, item.iteration).second) {
            throw Error(ErrorCategory::Analysis,
                        "duplicate score: " + item.article_id + "#" +
                            std::to_string(item.iteration));
        }
        matrix.cells[row->second][item.iteration] = item.score.value;
    }

    std::vector<std::string> gaps;
    for (std::size_t row = 0; row < article_ids.size(); ++row) {
        for (int it = 0; it < iterations; ++it) {
            if (!filled.count({row, it})) {
                gaps.push_back(article_ids[row] + "#" + std::to_string(it));
            }
        }
    }
    if (!gaps.empty()) {
        throw Error(ErrorCategory::Analysis, "missing scores for: " + join(gaps, ", "));
    }
    return matrix;
}

std::optional<double> mean_over(const ScoreMatrix& matrix, std::size_t article_row,
                                const std::vector<int>& iteration_subset) {
    if (article_row >= matrix.cells.size()) {
        throw Error(ErrorCategory::Analysis, "article row out of range");
    }
    if (iteration_subset.empty()) {
        throw Error(ErrorCategory::Analysis, "iteration subset is empty");
    }
    double sum = 0.0;
    int present = 0;
    for (int idx : iteration_subset) {
        if (idx < 0 || idx >= matrix.iterations) {
            throw Error(ErrorCategory::Analysis, "iteration index out of range");
        }
        const auto& cell = matrix.cells[article_row][idx];
        if (!cell) continue;
        sum += *cell;
        ++present;
    }
    if (present == 0) return std::nullopt;
    return sum / present;
}

std::optional<double> mean_all(const ScoreMatrix& matrix, std::size_t article_row) {
    std::vector<int> all(matrix.iterations);
    for (int i = 0; i < matrix.iterations; ++i) all[i] = i;
    return mean_over(matrix, article_row, all);
}

std::string matrix_to_csv(const ScoreMatrix& matrix) {
    std::string out = "article";
    for (int it = 0; it < matrix.iterations; ++it) {
        out += ",iter" + std::to_string(it);
    }
    out += ",human\n";
    for (std::size_t row = 0; row < matrix.article_ids.size(); ++row) {
        out += csv_field(matrix.article_ids[row]);
        for (int it = 0; it < matrix.iterations; ++it) {
            out += ',';
            out += format_number(matrix.cells[row][it]);
        }
        out += ',';
        out += format_number(matrix.human[row]);
        out += '\n';
    }
    return out;
}

void write_matrix_csv(const ScoreMatrix& matrix, const std::filesystem::path& path) {
    write_file_atomic(path, matrix_to_csv(matrix));
}

ScoreMatrix matrix_from_csv(const std::string& csv_text) {
    auto lines = split_lines(csv_text);
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    if (lines.size() < 2) {
        throw Error(ErrorCategory::Analysis, "matrix csv has no data rows");
    }
    auto header = split_csv_row(lines[0]);
    if (header.size() < 3 || header.front() != "article" || header.back() != "human") {
        throw Error(ErrorCategory::Analysis, "matrix csv header is malformed");
    }
    ScoreMatrix matrix;
    matrix.iterations = static_cast<int>(header.size()) - 2;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto fields = split_csv_row(lines[i]);
        if (fields.size() != header.size()) {
            throw Error(ErrorCategory::Analysis,
                        "matrix csv row " + std::to_string(i) + " has wrong field count");
        }
        matrix.article_ids.push_back(fields[0]);
        std::vector<std::optional<double>> row;
        for (int it = 0; it < matrix.iterations; ++it) {
            const auto& field = fields[1 + it];
            if (trim(field).empty()) {
                row.emplace_back(std::nullopt);
            } else {
                row.emplace_back(std::stod(field));
            }
        }
        matrix.cells.push_back(std::move(row));
        matrix.human.push_back(std::stod(fields.back()));
    }
    return matrix;
}

}  // namespace refscore
