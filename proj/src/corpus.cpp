#include "refscore/corpus.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "refscore/prompts.hpp"
#include "refscore/request_format.hpp"
#include "refscore/util.hpp"

namespace refscore {

namespace {

using ordered_json = nlohmann::ordered_json;

bool is_page_number_line(const std::string& normalized) {
    if (normalized.empty()) return false;
    return std::all_of(normalized.begin(), normalized.end(),
                       [](unsigned char c) { return std::isdigit(c); });
}

// Lines repeating on >= threshold distinct pages are headers/footers.
std::set<std::string> collect_repeated_lines(const std::vector<TextBlock>& blocks,
                                             int threshold) {
    std::map<std::string, std::set<std::string>> pages_per_line;
    for (const auto& block : blocks) {
        for (const auto& line : split_lines(block.text)) {
            auto norm = normalize_line(line);
            if (!norm.empty()) pages_per_line[norm].insert(block.page);
        }
    }
    std::set<std::string> repeated;
    for (const auto& [line, pages] : pages_per_line) {
        if (static_cast<int>(pages.size()) >= threshold) repeated.insert(line);
    }
    return repeated;
}

std::string strip_noise_lines(const std::string& text,
                              const std::set<std::string>& repeated) {
    std::string out;
    for (const auto& line : split_lines(text)) {
        auto norm = normalize_line(line);
        if (norm.empty()) continue;
        if (repeated.count(norm)) continue;
        if (is_page_number_line(norm)) continue;
        if (!out.empty()) out += ' ';
        out += trim(line);
    }
    return out;
}

std::string normalize_heading(const std::string& text) {
    auto norm = normalize_line(text);
    while (!norm.empty() && (norm.back() == ':' || norm.back() == '.')) {
        norm.pop_back();
    }
    return trim(norm);
}

bool is_reference_heading(const std::string& paragraph, const ViewOptions& options) {
    auto norm = normalize_heading(paragraph);
    if (norm.empty()) return false;
    // Accept an optional leading section number ("6 references").
    std::size_t pos = 0;
    while (pos < norm.size() && (std::isdigit(static_cast<unsigned char>(norm[pos])) ||
                                 norm[pos] == '.')) {
        ++pos;
    }
    std::string unnumbered = trim(norm.substr(pos));
    for (const auto& heading : options.reference_headings) {
        auto h = to_lower(heading);
        if (norm == h || unnumbered == h) return true;
    }
    return false;
}

std::string sanitize_filename(const std::string& id) {
    std::string out;
    for (char c : id) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') {
            out.push_back(c);
        } else {
            out.push_back('-');
        }
    }
    if (out.empty()) out = "article";
    return out;
}

Article article_from_json(const nlohmann::json& doc) {
    Article article;
    article.id = doc.at("id").get<std::string>();
    article.title = doc.at("title").get<std::string>();
    article.abstract = doc.value("abstract", std::string{});
    article.human_score = doc.at("human_score").get<double>();
    if (doc.contains("paragraphs")) {
        for (const auto& p : doc.at("paragraphs")) {
            Paragraph paragraph;
            paragraph.text = p.at("text").get<std::string>();
            paragraph.is_table = p.value("is_table", false);
            article.body.push_back(std::move(paragraph));
        }
    }
    return article;
}

ordered_json article_to_json(const Article& article) {
    ordered_json doc;
    doc["id"] = article.id;
    doc["title"] = article.title;
    doc["abstract"] = article.abstract;
    doc["human_score"] = article.human_score;
    auto paragraphs = ordered_json::array();
    for (const auto& p : article.body) {
        paragraphs.push_back({{"text", p.text}, {"is_table", p.is_table}});
    }
    doc["paragraphs"] = std::move(paragraphs);
    return doc;
}

}  // namespace

std::vector<Paragraph> clean_blocks_flagged(const std::vector<TextBlock>& blocks,
                                            const CleanOptions& options) {
    auto repeated = collect_repeated_lines(blocks, options.header_page_threshold);

    std::vector<Paragraph> paragraphs;
    for (const auto& block : blocks) {
        auto text = strip_noise_lines(block.text, repeated);
        if (text.empty()) continue;
        bool merge = !paragraphs.empty() && !paragraphs.back().is_table &&
                     !block.is_table &&
                     !ends_with_terminal_punctuation(paragraphs.back().text);
        if (merge) {
            paragraphs.back().text += ' ';
            paragraphs.back().text += text;
        } else {
            paragraphs.push_back({std::move(text), block.is_table});
        }
    }
    return paragraphs;
}

std::vector<std::string> clean_blocks(
    const std::vector<std::pair<std::string, std::string>>& blocks,
    const CleanOptions& options) {
    std::vector<TextBlock> flagged;
    flagged.reserve(blocks.size());
    for (const auto& [page, text] : blocks) {
        flagged.push_back({page, text, false});
    }
    std::vector<std::string> out;
    for (auto& paragraph : clean_blocks_flagged(flagged, options)) {
        out.push_back(std::move(paragraph.text));
    }
    return out;
}

DocumentView build_view(const Article& article, ViewKind kind,
                        const ViewOptions& options) {
    switch (kind) {
        case ViewKind::Title:
            return {kind, article.title};
        case ViewKind::Abstract:
            return {kind, article.title + "\n" + article.abstract};
        case ViewKind::Truncated: {
            if (article.body.empty()) {
                throw Error(ErrorCategory::Corpus,
                            "truncated view requested for article '" + article.id +
                                "' which has no body paragraphs");
            }
            std::string text = article.title + "\n" + article.abstract;
            for (const auto& paragraph : article.body) {
                if (is_reference_heading(paragraph.text, options)) break;
                if (paragraph.is_table) continue;
                text += '\n';
                text += paragraph.text;
            }
            return {kind, std::move(text)};
        }
    }
    throw Error(ErrorCategory::Config, "invalid view kind");
}

std::string make_custom_id(const std::string& article_id, int iteration) {
    return article_id + "#" + std::to_string(iteration);
}

CustomId parse_custom_id(const std::string& custom_id) {
    auto pos = custom_id.rfind('#');
    if (pos == std::string::npos || pos == 0 || pos + 1 >= custom_id.size()) {
        throw Error(ErrorCategory::Corpus, "malformed custom_id: " + custom_id);
    }
    CustomId parsed;
    parsed.article_id = custom_id.substr(0, pos);
    parsed.iteration = std::stoi(custom_id.substr(pos + 1));
    return parsed;
}

std::vector<std::string> to_jsonl(const Corpus& corpus, ViewKind kind,
                                  StrategyId strategy, const std::string& model,
                                  int iterations, const SamplingParams& params,
                                  const ViewOptions& view_options) {
    if (iterations < 1) {
        throw Error(ErrorCategory::Config, "iterations must be >= 1");
    }
    std::set<std::string> seen;
    for (const auto& article : corpus.articles) {
        if (!seen.insert(article.id).second) {
            throw Error(ErrorCategory::Corpus,
                        "duplicate article id in corpus: " + article.id);
        }
    }

    const std::string& system_text = system_prompt(strategy);
    std::vector<std::string> lines;
    lines.reserve(corpus.articles.size() * static_cast<std::size_t>(iterations));
    for (const auto& article : corpus.articles) {
        auto view = build_view(article, kind, view_options);
        auto user_text = user_prompt(view);
        auto body = completion_body_json(model, system_text, user_text, params);
        for (int iter = 0; iter < iterations; ++iter) {
            ordered_json line;
            line["custom_id"] = make_custom_id(article.id, iter);
            for (auto& [key, value] : body.items()) {
                line[key] = value;
            }
            lines.push_back(line.dump());
        }
    }
    return lines;
}

void validate_article(const Article& article) {
    if (article.id.empty()) {
        throw Error(ErrorCategory::Corpus, "article with empty id");
    }
    if (article.title.empty()) {
        throw Error(ErrorCategory::Corpus, "article '" + article.id + "' has empty title");
    }
    if (article.human_score < 1.0 || article.human_score > 4.0) {
        throw Error(ErrorCategory::Corpus,
                    "article '" + article.id + "' human score out of [1,4]: " +
                        format_number(article.human_score));
    }
}

void validate_corpus(const Corpus& corpus) {
    if (corpus.articles.empty()) {
        throw Error(ErrorCategory::Corpus, "corpus is empty");
    }
    std::set<std::string> seen;
    for (const auto& article : corpus.articles) {
        validate_article(article);
        if (!seen.insert(article.id).second) {
            throw Error(ErrorCategory::Corpus, "duplicate article id: " + article.id);
        }
    }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    validate_corpus(corpus);
    std::filesystem::create_directories(dir);

    ordered_json manifest;
    manifest["metadata"] = corpus.metadata;
    auto members = ordered_json::array();
    std::set<std::string> used_names;
    for (const auto& article : corpus.articles) {
        auto base = sanitize_filename(article.id);
        auto name = base + ".json";
        int suffix = 2;
        while (!used_names.insert(name).second) {
            name = base + "-" + std::to_string(suffix++) + ".json";
        }
        members.push_back(name);
        write_file_atomic(dir / name, article_to_json(article).dump(2) + "\n");
    }
    manifest["articles"] = std::move(members);
    write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Corpus load_corpus(const std::filesystem::path& dir) {
    auto manifest_path = dir / "manifest.json";
    if (!std::filesystem::exists(manifest_path)) {
        throw Error(ErrorCategory::Corpus,
                    "corpus manifest not found: " + manifest_path.string());
    }
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::Corpus,
                    "corpus manifest unreadable: " + std::string(e.what()));
    }

    Corpus corpus;
    corpus.metadata = manifest.value("metadata", std::string{});
    for (const auto& member : manifest.at("articles")) {
        auto path = dir / member.get<std::string>();
        try {
            corpus.articles.push_back(
                article_from_json(nlohmann::json::parse(read_file(path))));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCategory::Corpus,
                        "article file " + path.string() + " unreadable: " + e.what());
        }
    }
    validate_corpus(corpus);
    return corpus;
}

Article ingest_raw_article(const std::string& raw_json, const CleanOptions& options) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(raw_json);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::Corpus, "raw article unreadable: " + std::string(e.what()));
    }

    Article article;
    std::vector<TextBlock> blocks;
    try {
        article.id = doc.at("id").get<std::string>();
        article.title = trim(doc.at("title").get<std::string>());
        article.abstract = trim(doc.value("abstract", std::string{}));
        article.human_score = doc.at("human_score").get<double>();

        for (const auto& b : doc.value("blocks", nlohmann::json::array())) {
            TextBlock block;
            block.page = b.at("page").is_string() ? b.at("page").get<std::string>()
                                                  : b.at("page").dump();
            block.text = b.at("text").get<std::string>();
            block.is_table = b.value("is_table", false);
            blocks.push_back(std::move(block));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::Corpus, "raw article malformed: " + std::string(e.what()));
    }
    article.body = clean_blocks_flagged(blocks, options);
    validate_article(article);
    return article;
}

Corpus ingest_raw_directory(const std::filesystem::path& raw_dir,
                            const CleanOptions& options) {
    if (!std::filesystem::is_directory(raw_dir)) {
        throw Error(ErrorCategory::Corpus,
                    "raw article directory not found: " + raw_dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(raw_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());

    Corpus corpus;
    corpus.metadata = "ingested from " + raw_dir.string();
    for (const auto& file : files) {
        corpus.articles.push_back(ingest_raw_article(read_file(file), options));
    }
    validate_corpus(corpus);
    return corpus;
}

}  // namespace refscore
