#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace refscore {

// The three input renderings of an article.
enum class ViewKind { Title, Abstract, Truncated };

// System prompt strategies. S1..S5 are nested prefixes of S6; S0 is the
// short no-justification prompt; S6MinusDefs is S6 without the
// originality/significance/rigour definition paragraphs.
enum class StrategyId { S0, S1, S2, S3, S4, S5, S6, S6MinusDefs };

enum class BackendKind { Live, Mock, Replay };

// Sampling parameters sent with every completion request.
struct SamplingParams {
    double temperature = 1.0;
    double top_p = 1.0;
    int max_tokens = 1000;
};

enum class ErrorCategory { Config, Corpus, Network, Queue, Analysis };

// Single error type carrying a category; the CLI maps categories to
// distinct exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const { return category_; }

private:
    ErrorCategory category_;
};

// Replay backend asked for a record that is not in the cache.
class CacheMissError : public Error {
public:
    explicit CacheMissError(const std::string& message)
        : Error(ErrorCategory::Network, message) {}
};

std::string to_string(ViewKind kind);
std::string to_string(StrategyId id);
std::string to_string(BackendKind backend);

ViewKind parse_view_kind(const std::string& text);
StrategyId parse_strategy_id(const std::string& text);
BackendKind parse_backend_kind(const std::string& text);

int exit_code_for(ErrorCategory category);

}  // namespace refscore
