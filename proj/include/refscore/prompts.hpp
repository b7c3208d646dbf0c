#pragma once

#include <string>
#include <vector>

#include "refscore/types.hpp"

namespace refscore {

struct DocumentView;  // corpus.hpp

// Full system prompt text for a strategy. Texts are embedded in the
// binary; S1..S5 are proper prefixes of S6 by construction.
const std::string& system_prompt(StrategyId id);

// All strategy ids, S0 first then S1..S6 and the no-definitions variant.
std::vector<StrategyId> all_strategies();

// Strategies used when an experiment does not name any explicitly
// (S0..S6; the no-definitions variant is opt-in).
std::vector<StrategyId> default_strategies();

// Literal prefix prepended to every user prompt.
extern const std::string kUserPromptPrefix;

// "Score the following journal article: " followed by the view text,
// unmodified. Empty view text is a config error.
std::string user_prompt(const DocumentView& view);
std::string user_prompt(const std::string& view_text);

}  // namespace refscore
