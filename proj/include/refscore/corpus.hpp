#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "refscore/types.hpp"

namespace refscore {

struct Paragraph {
    std::string text;
    bool is_table = false;
};

// One corpus item. Body paragraphs are already cleaned (merged, headers
// stripped); table paragraphs keep their ingestion flag.
struct Article {
    std::string id;
    std::string title;
    std::string abstract;
    std::vector<Paragraph> body;
    double human_score = 0.0;  // REF scale, 1.0..4.0, mid-scores legal
};

struct DocumentView {
    ViewKind kind;
    std::string text;
};

struct Corpus {
    std::vector<Article> articles;
    std::string metadata;
};

// Raw extractor output: one text block with the page it came from.
struct TextBlock {
    std::string page;
    std::string text;
    bool is_table = false;
};

struct CleanOptions {
    // A normalized line repeating on at least this many distinct pages is
    // treated as a header/footer and removed.
    int header_page_threshold = 3;
};

struct ViewOptions {
    std::vector<std::string> reference_headings = {"References", "Bibliography"};
};

// Merge extractor blocks into paragraphs and strip repeated headers/footers
// and page-number lines. Blocks must be in reading order. Idempotent.
std::vector<std::string> clean_blocks(
    const std::vector<std::pair<std::string, std::string>>& blocks,
    const CleanOptions& options = {});

// Same cleaning, preserving per-block table flags; table blocks never merge
// with surrounding text.
std::vector<Paragraph> clean_blocks_flagged(const std::vector<TextBlock>& blocks,
                                            const CleanOptions& options = {});

// Title -> title; Abstract -> title \n abstract; Truncated -> title,
// abstract, then body paragraphs with the reference-list section and table
// paragraphs removed. Truncated on an empty body is a corpus error.
DocumentView build_view(const Article& article, ViewKind kind,
                        const ViewOptions& options = {});

// One JSONL line per (article, iteration): custom_id "articleId#iteration",
// model, system+user messages, and sampling parameters.
std::vector<std::string> to_jsonl(const Corpus& corpus, ViewKind kind,
                                  StrategyId strategy, const std::string& model,
                                  int iterations, const SamplingParams& params = {},
                                  const ViewOptions& view_options = {});

struct CustomId {
    std::string article_id;
    int iteration = 0;
};

std::string make_custom_id(const std::string& article_id, int iteration);
CustomId parse_custom_id(const std::string& custom_id);

void validate_article(const Article& article);
void validate_corpus(const Corpus& corpus);

// Corpus directory: manifest.json naming member files, one JSON document
// per article.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

// Raw ingestion input: JSON with id/title/abstract/human_score and a list
// of page-tagged text blocks; cleaning turns the blocks into paragraphs.
Article ingest_raw_article(const std::string& raw_json,
                           const CleanOptions& options = {});
Corpus ingest_raw_directory(const std::filesystem::path& raw_dir,
                            const CleanOptions& options = {});

}  // namespace refscore
