#include "refscore/llm_client.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "refscore/prompts.hpp"
#include "refscore/request_format.hpp"
#include "refscore/util.hpp"

namespace refscore {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kScaleMin = 1.0;
constexpr double kScaleMax = 4.0;

double clamp_scale(double v) { return std::min(kScaleMax, std::max(kScaleMin, v)); }

int clamp_star(double v) {
    return static_cast<int>(clamp_scale(std::floor(v + 0.5)));
}

std::string record_timestamp(const Backend& backend) {
    return backend.fixed_timestamp.empty() ? now_iso8601() : backend.fixed_timestamp;
}

void persist(Backend& backend, const CompletionKey& key,
             const CompletionRequest& request, const std::string& report) {
    if (backend.cache == nullptr) return;
    auto fingerprint = request.fingerprint();
    if (auto existing = backend.cache->find(key)) {
        if (existing->fingerprint != fingerprint) {
            throw Error(ErrorCategory::Analysis,
                        "cache already holds a record for " + key.to_string() +
                            " with a different request fingerprint; use a fresh "
                            "output directory or matching configuration");
        }
        return;
    }
    CompletionRecord record;
    record.key = key;
    record.fingerprint = fingerprint;
    record.report = report;
    record.backend = backend.kind;
    record.timestamp = record_timestamp(backend);
    backend.cache->append(record);
}

struct ParsedUrl {
    std::string base;  // scheme://host[:port]
    std::string path;
};

ParsedUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCategory::Config, "endpoint URL missing scheme: " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::string live_complete(const CompletionRequest& request, const LiveConfig& config) {
    const char* credential = std::getenv(config.credential_env.c_str());
    if (credential == nullptr || *credential == '\0') {
        throw Error(ErrorCategory::Config,
                    "live backend requires credential in $" + config.credential_env);
    }

    auto url = split_url(config.url);
    auto body = completion_body_json(request.model, request.system_text,
                                     request.user_text, request.params)
                    .dump();

    std::string last_error;
    for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
        if (attempt > 1) {
            // Exponential backoff with deterministic-per-attempt jitter.
            auto jitter_bits = fnv1a64(request.fingerprint() + std::to_string(attempt));
            double jitter = 1.0 + 0.5 * static_cast<double>(jitter_bits % 1000) / 1000.0;
            auto delay = static_cast<long>(config.base_backoff_ms *
                                           (1L << (attempt - 2)) * jitter);
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }

        httplib::Client client(url.base);
        client.set_connection_timeout(config.timeout_seconds, 0);
        client.set_read_timeout(config.timeout_seconds, 0);
        httplib::Headers headers = {
            {"Authorization", std::string("Bearer ") + credential}};
        auto result = client.Post(url.path, headers, body, "application/json");

        if (!result) {
            last_error = "transport error: " + httplib::to_string(result.error());
            continue;
        }
        if (result->status == 429 || result->status >= 500) {
            last_error = "HTTP " + std::to_string(result->status);
            continue;
        }
        if (result->status != 200) {
            throw Error(ErrorCategory::Network,
                        "completion request rejected with HTTP " +
                            std::to_string(result->status) + ": " + result->body);
        }

        try {
            auto doc = nlohmann::json::parse(result->body);
            const auto& content = doc.at("choices").at(0).at("message").at("content");
            if (!content.is_string()) {
                throw Error(ErrorCategory::Network,
                            "malformed response: assistant content is not text");
            }
            return content.get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCategory::Network,
                        "malformed response: missing assistant content (" +
                            std::string(e.what()) + ")");
        }
    }
    throw Error(ErrorCategory::Network,
                "completion failed after " + std::to_string(config.max_attempts) +
                    " attempts; last error: " + last_error);
}

const char* kRefusalTexts[] = {
    "There is insufficient information to make a judgement about the quality "
    "of this work.",
    "It is impossible to evaluate an article from this input alone, so no "
    "score is given.",
    "I am unable to make a judgement on originality, significance or rigour "
    "from the material provided.",
};

const char* kOpeners[] = {
    "The article addresses a clearly scoped problem and reports its methods "
    "in a structured way.",
    "This work engages with an established line of enquiry and presents a "
    "coherent argument.",
    "The study makes its aims explicit and situates the contribution within "
    "the field.",
    "The manuscript is well organised, with the analysis following directly "
    "from the stated research questions.",
};

}  // namespace

void CompletionRequest::validate() const {
    if (model.empty()) {
        throw Error(ErrorCategory::Config, "completion request without model id");
    }
    if (params.temperature < 0.0 || params.temperature > 2.0) {
        throw Error(ErrorCategory::Config, "temperature out of [0,2]");
    }
    if (!(params.top_p > 0.0) || params.top_p > 1.0) {
        throw Error(ErrorCategory::Config, "top_p out of (0,1]");
    }
    if (params.max_tokens < 1) {
        throw Error(ErrorCategory::Config, "max_tokens must be >= 1");
    }
}

std::string CompletionRequest::fingerprint() const {
    return fnv1a64_hex(
        completion_body_json(model, system_text, user_text, params).dump());
}

std::string CompletionKey::to_string() const {
    return article_id + "|" + refscore::to_string(view) + "|" +
           refscore::to_string(strategy) + "|" + model + "|" +
           std::to_string(iteration);
}

CompletionCache CompletionCache::load(const std::filesystem::path& file) {
    CompletionCache cache;
    cache.file_ = file;
    if (!std::filesystem::exists(file)) return cache;

    for (const auto& line : split_lines(read_file(file))) {
        if (trim(line).empty()) continue;
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCategory::Analysis,
                        "corrupt cache line in " + file.string() + ": " + e.what());
        }
        CompletionRecord record;
        record.key.article_id = doc.at("article_id").get<std::string>();
        record.key.view = parse_view_kind(doc.at("view").get<std::string>());
        record.key.strategy = parse_strategy_id(doc.at("strategy").get<std::string>());
        record.key.model = doc.at("model").get<std::string>();
        record.key.iteration = doc.at("iteration").get<int>();
        record.fingerprint = doc.at("fingerprint").get<std::string>();
        record.report = doc.at("report").get<std::string>();
        record.backend = parse_backend_kind(doc.at("backend").get<std::string>());
        record.timestamp = doc.value("timestamp", std::string{});
        auto key = record.key.to_string();
        if (cache.by_key_.emplace(key, std::move(record)).second) {
            cache.order_.push_back(key);
        }
    }
    return cache;
}

void CompletionCache::bind_file(const std::filesystem::path& file) {
    std::lock_guard lock(*mutex_);
    file_ = file;
}

std::optional<CompletionRecord> CompletionCache::find(const CompletionKey& key) const {
    std::lock_guard lock(*mutex_);
    auto it = by_key_.find(key.to_string());
    if (it == by_key_.end()) return std::nullopt;
    return it->second;
}

void CompletionCache::append(const CompletionRecord& record) {
    std::lock_guard lock(*mutex_);
    auto key = record.key.to_string();
    if (!by_key_.emplace(key, record).second) {
        throw Error(ErrorCategory::Analysis, "duplicate cache record for " + key);
    }
    order_.push_back(key);

    if (file_.empty()) return;
    auto parent = file_.parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    ordered_json doc;
    doc["article_id"] = record.key.article_id;
    doc["view"] = refscore::to_string(record.key.view);
    doc["strategy"] = refscore::to_string(record.key.strategy);
    doc["model"] = record.key.model;
    doc["iteration"] = record.key.iteration;
    doc["fingerprint"] = record.fingerprint;
    doc["backend"] = refscore::to_string(record.backend);
    doc["timestamp"] = record.timestamp;
    doc["report"] = record.report;
    std::ofstream out(file_, std::ios::binary | std::ios::app);
    if (!out) {
        throw Error(ErrorCategory::Analysis, "cannot append to cache " + file_.string());
    }
    out << doc.dump() << '\n';
}

std::size_t CompletionCache::size() const {
    std::lock_guard lock(*mutex_);
    return by_key_.size();
}

std::vector<CompletionRecord> CompletionCache::records() const {
    std::lock_guard lock(*mutex_);
    std::vector<CompletionRecord> out;
    out.reserve(order_.size());
    for (const auto& key : order_) {
        out.push_back(by_key_.at(key));
    }
    return out;
}

double mock_latent_quality(const std::string& user_text) {
    auto hash = fnv1a64(user_text);
    double unit = static_cast<double>(hash >> 11) * 0x1.0p-53;
    return kScaleMin + (kScaleMax - kScaleMin) * unit;
}

std::string mock_complete(std::uint64_t seed, const CompletionRequest& request,
                          const MockConfig& config) {
    DeterministicRng rng(mix_seed(seed, fnv1a64(request.user_text)));

    bool is_title_input = request.user_text.find('\n') == std::string::npos;
    double refusal_prob = is_title_input ? config.title_refusal_prob
                                         : config.refusal_prob;
    if (rng.uniform01() < refusal_prob) {
        return kRefusalTexts[rng.bounded(std::size(kRefusalTexts))];
    }

    double latent = mock_latent_quality(request.user_text);
    double center = clamp_scale(latent + rng.normal(0.0, config.noise_sd));
    int star = clamp_star(center);
    std::string opener = kOpeners[rng.bounded(std::size(kOpeners))];

    switch (rng.bounded(6)) {
        case 0: {  // JSON-style summary with an explicit overall entry
            int orig = clamp_star(center + rng.normal(0.0, 0.35));
            int sig = clamp_star(center + rng.normal(0.0, 0.35));
            int rig = clamp_star(center + rng.normal(0.0, 0.35));
            return opener + " {\"Originality\": \"" + std::to_string(orig) +
                   "*\", \"Significance\": \"" + std::to_string(sig) +
                   "*\", \"Rigour\": \"" + std::to_string(rig) +
                   "*\", \"Overall Score**\": \"" + std::to_string(star) + "*\"}";
        }
        case 1:
            return opener + " Overall score: " + std::to_string(star) + "*.";
        case 2:
            return opener + " Thus, this article is assigned a score of " +
                   std::to_string(star) + "*.";
        case 3: {  // three sub-scores, no overall
            int orig = clamp_star(center + rng.normal(0.0, 0.35));
            int sig = clamp_star(center + rng.normal(0.0, 0.35));
            int rig = clamp_star(center + rng.normal(0.0, 0.35));
            return opener + " Originality: " + std::to_string(orig) +
                   "*. Significance: " + std::to_string(sig) +
                   "*. Rigour: " + std::to_string(rig) + "*.";
        }
        case 4: {  // two- or three-point range
            int lo, hi;
            if (rng.bounded(2) == 0) {
                hi = std::min(4, star + 1);
                lo = hi - 1;
                return opener + " I would place this at " + std::to_string(lo) +
                       "* to " + std::to_string(hi) + "*.";
            }
            lo = std::max(1, star - 1);
            hi = std::min(4, lo + 2);
            return opener + " The quality lies between " + std::to_string(lo) +
                   "* and " + std::to_string(hi) + "*.";
        }
        default: {  // originality + significance only
            int orig = clamp_star(center + rng.normal(0.0, 0.35));
            int sig = clamp_star(center + rng.normal(0.0, 0.35));
            return opener + " Originality: " + std::to_string(orig) +
                   "*. Significance: " + std::to_string(sig) +
                   "*. Rigour cannot be judged from the material provided.";
        }
    }
}

std::string complete(const CompletionRequest& request, const CompletionKey& key,
                     Backend& backend) {
    request.validate();
    switch (backend.kind) {
        case BackendKind::Mock: {
            auto seed = mix_seed(backend.seed, fnv1a64(key.to_string()));
            auto report = mock_complete(seed, request, backend.mock);
            persist(backend, key, request, report);
            return report;
        }
        case BackendKind::Replay: {
            if (backend.cache == nullptr) {
                throw Error(ErrorCategory::Config, "replay backend requires a cache");
            }
            auto record = backend.cache->find(key);
            if (!record) {
                throw CacheMissError("not cached: " + key.to_string());
            }
            if (record->fingerprint != request.fingerprint()) {
                throw Error(ErrorCategory::Analysis,
                            "cached record for " + key.to_string() +
                                " was produced by a different request (prompt or "
                                "parameter drift)");
            }
            return record->report;
        }
        case BackendKind::Live: {
            auto report = live_complete(request, backend.live);
            persist(backend, key, request, report);
            return report;
        }
    }
    throw Error(ErrorCategory::Config, "invalid backend");
}

CompletionRequest build_request(const Article& article, ViewKind kind,
                                StrategyId strategy, const std::string& model,
                                const SamplingParams& params,
                                const ViewOptions& view_options) {
    CompletionRequest request;
    request.model = model;
    request.system_text = system_prompt(strategy);
    request.user_text = user_prompt(build_view(article, kind, view_options));
    request.params = params;
    return request;
}

std::vector<std::string> run_iterations(const Article& article, ViewKind kind,
                                        StrategyId strategy, const std::string& model,
                                        int n, Backend& backend,
                                        const SamplingParams& params,
                                        const ViewOptions& view_options,
                                        int parallel) {
    if (n < 1) {
        throw Error(ErrorCategory::Config, "iteration count must be >= 1");
    }
    auto request = build_request(article, kind, strategy, model, params, view_options);
    request.validate();

    std::vector<std::string> reports(static_cast<std::size_t>(n));
    auto key_for = [&](int iteration) {
        return CompletionKey{article.id, kind, strategy, model, iteration};
    };

    bool use_pool = backend.kind == BackendKind::Live && parallel > 1 && n > 1;
    if (!use_pool) {
        for (int i = 0; i < n; ++i) {
            try {
                reports[static_cast<std::size_t>(i)] =
                    complete(request, key_for(i), backend);
            } catch (const CacheMissError& e) {
                throw CacheMissError("iteration " + std::to_string(i) + ": " + e.what());
            } catch (const Error& e) {
                throw Error(e.category(),
                            "iteration " + std::to_string(i) + ": " + e.what());
            }
        }
        return reports;
    }

    int workers = std::min(parallel, n);
    std::atomic<int> next{0};
    std::mutex failure_mutex;
    int failed_index = -1;
    ErrorCategory failed_category = ErrorCategory::Network;
    std::string failed_message;

    auto worker = [&]() {
        while (true) {
            int i = next.fetch_add(1);
            if (i >= n) return;
            try {
                reports[static_cast<std::size_t>(i)] =
                    complete(request, key_for(i), backend);
            } catch (const Error& e) {
                std::lock_guard lock(failure_mutex);
                if (failed_index < 0 || i < failed_index) {
                    failed_index = i;
                    failed_category = e.category();
                    failed_message = e.what();
                }
                return;
            }
        }
    };

    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    if (failed_index >= 0) {
        throw Error(failed_category, "iteration " + std::to_string(failed_index) +
                                         ": " + failed_message);
    }
    return reports;
}

}  // namespace refscore
