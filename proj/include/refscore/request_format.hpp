#pragma once

#include <string>

#include <json.hpp>

#include "refscore/types.hpp"

namespace refscore {

// Chat-completions request body: model, system+user messages, sampling
// parameters. Shared by the JSONL batch builder and the live client so the
// two surfaces cannot drift apart.
inline nlohmann::ordered_json completion_body_json(const std::string& model,
                                                   const std::string& system_text,
                                                   const std::string& user_text,
                                                   const SamplingParams& params) {
    nlohmann::ordered_json body;
    body["model"] = model;
    body["messages"] = nlohmann::ordered_json::array(
        {{{"role", "system"}, {"content", system_text}},
         {{"role", "user"}, {"content", user_text}}});
    body["temperature"] = params.temperature;
    body["top_p"] = params.top_p;
    body["max_tokens"] = params.max_tokens;
    return body;
}

}  // namespace refscore
