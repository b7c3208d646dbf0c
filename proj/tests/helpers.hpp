#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "refscore/corpus.hpp"
#include "refscore/llm_client.hpp"
#include "refscore/prompts.hpp"
#include "refscore/util.hpp"

namespace testhelp {

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        auto base = std::filesystem::temp_directory_path();
        for (int i = 0; i < 10000; ++i) {
            auto candidate = base / ("refscore_" + tag + "_" + std::to_string(i));
            std::error_code ec;
            if (std::filesystem::create_directories(candidate, ec)) {
                dir_ = candidate;
                return;
            }
        }
        throw std::runtime_error("cannot create temp dir for " + tag);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(dir_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return dir_; }

private:
    std::filesystem::path dir_;
};

inline std::string two_digits(int n) {
    return (n < 10 ? "0" : "") + std::to_string(n);
}

// Synthetic article with a body long enough for the truncated view, plus a
// reference section the view must drop.
inline refscore::Article synthetic_article(int index) {
    refscore::Article article;
    article.id = "a" + two_digits(index);
    article.title = "Citation context study " + std::to_string(index) +
                    ": reader behavior in field " + std::to_string(index % 7);
    article.abstract =
        "This study examines corpus " + std::to_string(index) +
        " using mixed methods. We collect records from " +
        std::to_string(100 + index * 13) +
        " venues and model reader behavior over time. Findings indicate "
        "variation across fields and publication years, with implications "
        "for evaluation practice.";
    for (int p = 0; p < 4; ++p) {
        refscore::Paragraph para;
        para.text = "Section " + std::to_string(p + 1) + " of article " +
                    std::to_string(index) +
                    " discusses methodology detail level " + std::to_string(p) +
                    " and reports intermediate outcomes for the sample.";
        article.body.push_back(para);
    }
    refscore::Paragraph heading;
    heading.text = "References";
    article.body.push_back(heading);
    refscore::Paragraph ref;
    ref.text = "Author, A. (2020). Prior work " + std::to_string(index) + ".";
    article.body.push_back(ref);
    return article;
}

// Human score on the REF half-point grid, tracking the mock backend's
// latent quality for the abstract view so averaging over iterations is
// informative.
inline double human_score_for(const refscore::Article& article) {
    auto view = refscore::build_view(article, refscore::ViewKind::Abstract);
    double latent = refscore::mock_latent_quality(refscore::user_prompt(view));
    double snapped = refscore::round_half_up(latent * 2.0, 0) / 2.0;
    if (snapped < 1.0) snapped = 1.0;
    if (snapped > 4.0) snapped = 4.0;
    return snapped;
}

inline refscore::Corpus synthetic_corpus(int count) {
    refscore::Corpus corpus;
    corpus.metadata = "synthetic fixture corpus";
    for (int i = 1; i <= count; ++i) {
        auto article = synthetic_article(i);
        article.human_score = human_score_for(article);
        corpus.articles.push_back(std::move(article));
    }
    return corpus;
}

}  // namespace testhelp
