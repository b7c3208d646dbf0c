#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "refscore/score_parser.hpp"
#include "refscore/types.hpp"

namespace refscore {

// Scores for one experiment cell: one row per article, one column per
// iteration. Absent cells are refusals (ScoreKind::Missing); a row may be
// entirely absent. Human benchmark scores ride along for correlation work.
struct ScoreMatrix {
    std::vector<std::string> article_ids;
    std::vector<std::vector<std::optional<double>>> cells;  // [article][iteration]
    std::vector<double> human;
    int iterations = 0;

    std::size_t article_count() const { return article_ids.size(); }
    std::optional<std::size_t> row_of(const std::string& article_id) const;
};

struct ScoredIteration {
    std::string article_id;
    int iteration = 0;  // 0-based, matching custom ids and cache keys
    ParsedScore score;
};

// Assembles the matrix from per-iteration parse results. Every article must
// supply every iteration exactly once, and no unresolved queue entries may
// remain in this cell for these articles; violations are reported with the
// offending article#iteration pairs.
ScoreMatrix build_matrix(const std::vector<std::string>& article_ids,
                         const std::vector<double>& human_scores,
                         int iterations,
                         const std::vector<ScoredIteration>& scored,
                         const ManualQueue& queue,
                         const std::string& cell = {});

// Mean model score for one article over a multiset of iteration indices
// (0-based, repeats count again). Missing cells are skipped; if every chosen
// cell is missing the article has no score for this subset.
std::optional<double> mean_over(const ScoreMatrix& matrix, std::size_t article_row,
                                const std::vector<int>& iteration_subset);

// Mean over all iterations of one article.
std::optional<double> mean_all(const ScoreMatrix& matrix, std::size_t article_row);

std::string matrix_to_csv(const ScoreMatrix& matrix);
void write_matrix_csv(const ScoreMatrix& matrix, const std::filesystem::path& path);
ScoreMatrix matrix_from_csv(const std::string& csv_text);

}  // namespace refscore
