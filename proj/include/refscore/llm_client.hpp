#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "refscore/corpus.hpp"
#include "refscore/types.hpp"

namespace refscore {

struct CompletionRequest {
    std::string model;
    std::string system_text;
    std::string user_text;
    SamplingParams params;

    void validate() const;
    // FNV-1a of the serialized request body; detects prompt/parameter drift
    // between a run and a later replay.
    std::string fingerprint() const;
};

// Cache key: one completion per (article, view, strategy, model, iteration).
struct CompletionKey {
    std::string article_id;
    ViewKind view = ViewKind::Abstract;
    StrategyId strategy = StrategyId::S6;
    std::string model;
    int iteration = 0;

    std::string to_string() const;
};

struct CompletionRecord {
    CompletionKey key;
    std::string fingerprint;
    std::string report;
    BackendKind backend = BackendKind::Mock;
    std::string timestamp;
};

// Append-only completion store, JSONL on disk, replayable offline.
// Movable; the mutex guards appends from live worker threads.
class CompletionCache {
public:
    CompletionCache() : mutex_(std::make_unique<std::mutex>()) {}

    static CompletionCache load(const std::filesystem::path& file);

    // Binds the file used for appends; the file need not exist yet.
    void bind_file(const std::filesystem::path& file);

    std::optional<CompletionRecord> find(const CompletionKey& key) const;
    void append(const CompletionRecord& record);
    std::size_t size() const;
    std::vector<CompletionRecord> records() const;

private:
    std::unique_ptr<std::mutex> mutex_;
    std::filesystem::path file_;
    std::map<std::string, CompletionRecord> by_key_;
    std::vector<std::string> order_;
};

struct MockConfig {
    double refusal_prob = 0.02;
    // Title-only inputs refuse more often, mirroring observed behavior.
    double title_refusal_prob = 0.25;
    double noise_sd = 0.6;
};

struct LiveConfig {
    std::string url = "https://api.openai.com/v1/chat/completions";
    std::string credential_env = "REFSCORE_API_KEY";
    int max_attempts = 5;
    int base_backoff_ms = 250;
    int timeout_seconds = 120;
};

struct Backend {
    BackendKind kind = BackendKind::Mock;
    MockConfig mock;
    LiveConfig live;
    std::uint64_t seed = 0;
    CompletionCache* cache = nullptr;
    // Fixed record timestamp for reproducible runs; wall clock when empty.
    std::string fixed_timestamp;
};

// Stable per-article latent quality in [1,4], derived from the request
// text. Tests set human scores from this to obtain correlated fixtures.
double mock_latent_quality(const std::string& user_text);

// Deterministic fake report in one of the observed surface formats
// (overall score, sub-score triple, range, originality+significance only,
// or a refusal). Same (seed, request) always yields the same text.
std::string mock_complete(std::uint64_t seed, const CompletionRequest& request,
                          const MockConfig& config = {});

// One completion via the selected backend. Live responses are persisted to
// the attached cache before returning; replay answers from the cache only.
std::string complete(const CompletionRequest& request, const CompletionKey& key,
                     Backend& backend);

CompletionRequest build_request(const Article& article, ViewKind kind,
                                StrategyId strategy, const std::string& model,
                                const SamplingParams& params = {},
                                const ViewOptions& view_options = {});

// n independent completions for one article, iteration indices 0..n-1.
// Live requests run with bounded parallelism; results are ordered by
// iteration index regardless of completion order.
std::vector<std::string> run_iterations(const Article& article, ViewKind kind,
                                        StrategyId strategy, const std::string& model,
                                        int n, Backend& backend,
                                        const SamplingParams& params = {},
                                        const ViewOptions& view_options = {},
                                        int parallel = 4);

}  // namespace refscore
