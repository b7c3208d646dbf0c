#include "refscore/types.hpp"

#include "refscore/util.hpp"

namespace refscore {

std::string to_string(ViewKind kind) {
    switch (kind) {
        case ViewKind::Title: return "title";
        case ViewKind::Abstract: return "abstract";
        case ViewKind::Truncated: return "truncated";
    }
    return "unknown";
}

std::string to_string(StrategyId id) {
    switch (id) {
        case StrategyId::S0: return "s0";
        case StrategyId::S1: return "s1";
        case StrategyId::S2: return "s2";
        case StrategyId::S3: return "s3";
        case StrategyId::S4: return "s4";
        case StrategyId::S5: return "s5";
        case StrategyId::S6: return "s6";
        case StrategyId::S6MinusDefs: return "s6_minus_defs";
    }
    return "unknown";
}

std::string to_string(BackendKind backend) {
    switch (backend) {
        case BackendKind::Live: return "live";
        case BackendKind::Mock: return "mock";
        case BackendKind::Replay: return "replay";
    }
    return "unknown";
}

ViewKind parse_view_kind(const std::string& text) {
    auto t = to_lower(trim(text));
    if (t == "title" || t == "titles") return ViewKind::Title;
    if (t == "abstract" || t == "abstracts") return ViewKind::Abstract;
    if (t == "truncated" || t == "truncated_text") return ViewKind::Truncated;
    throw Error(ErrorCategory::Config, "unknown view kind: " + text);
}

StrategyId parse_strategy_id(const std::string& text) {
    auto t = to_lower(trim(text));
    if (t == "s0") return StrategyId::S0;
    if (t == "s1") return StrategyId::S1;
    if (t == "s2") return StrategyId::S2;
    if (t == "s3") return StrategyId::S3;
    if (t == "s4") return StrategyId::S4;
    if (t == "s5") return StrategyId::S5;
    if (t == "s6") return StrategyId::S6;
    if (t == "s6_minus_defs" || t == "s6-minus-defs") return StrategyId::S6MinusDefs;
    throw Error(ErrorCategory::Config, "unknown strategy id: " + text);
}

BackendKind parse_backend_kind(const std::string& text) {
    auto t = to_lower(trim(text));
    if (t == "live") return BackendKind::Live;
    if (t == "mock") return BackendKind::Mock;
    if (t == "replay") return BackendKind::Replay;
    throw Error(ErrorCategory::Config, "unknown backend: " + text);
}

int exit_code_for(ErrorCategory category) {
    switch (category) {
        case ErrorCategory::Config: return 2;
        case ErrorCategory::Corpus: return 3;
        case ErrorCategory::Network: return 4;
        case ErrorCategory::Queue: return 5;
        case ErrorCategory::Analysis: return 6;
    }
    return 1;
}

}  // namespace refscore
