#include "poqd/llm_client.hpp"

#include <nlohmann/json.hpp>

#include "poqd/errors.hpp"
#include "poqd/http.hpp"
#include "poqd/text.hpp"

namespace poqd {

void LlmClientSpec::validate() const {
    if (temperature < 0.0) {
        throw ConfigError("llm temperature must be >= 0");
    }
    if (max_tokens < 1) {
        throw ConfigError("llm max-tokens must be >= 1");
    }
    if (kind == LlmKind::kRemote && trim(endpoint_url).empty()) {
        throw ConfigError("remote llm requires a non-empty endpoint-url");
    }
}

LlmClient::LlmClient(LlmClientSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    if (spec_.kind == LlmKind::kRemote) {
        api_key_ = api_key_from_env(kLlmApiKeyEnv);
    }
}

std::string LlmClient::complete(const std::string& prompt) {
    ++calls_;
    if (spec_.kind == LlmKind::kScriptedMock) {
        if (spec_.script.empty()) {
            throw ConfigError("scripted llm has an empty script");
        }
        const std::size_t idx = std::min(cursor_, spec_.script.size() - 1);
        ++cursor_;
        return spec_.script[idx];
    }

    nlohmann::json body{
        {"model", spec_.model_name},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
        {"temperature", spec_.temperature},
        {"max_tokens", spec_.max_tokens},
    };
    const std::string raw = post_json(spec_.endpoint_url, "/v1/chat/completions", body, api_key_);

    nlohmann::json reply = nlohmann::json::parse(raw, nullptr, false);
    if (reply.is_discarded() || !reply.contains("choices") || !reply["choices"].is_array() ||
        reply["choices"].empty()) {
        throw ProtocolError("chat reply is missing a non-empty 'choices' array");
    }
    const auto& first = reply["choices"][0];
    if (!first.contains("message") || !first["message"].contains("content") ||
        !first["message"]["content"].is_string()) {
        throw ProtocolError("chat reply choice is missing 'message.content'");
    }
    return first["message"]["content"].get<std::string>();
}

} // namespace poqd
