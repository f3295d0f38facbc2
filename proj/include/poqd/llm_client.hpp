#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace poqd {

enum class LlmKind {
    kRemote,       ///< POST {endpoint}/v1/chat/completions
    kScriptedMock, ///< replays canned responses; no network
};

struct LlmClientSpec {
    LlmKind kind = LlmKind::kScriptedMock;
    std::string endpoint_url; ///< remote only
    std::string model_name;   ///< remote only
    double temperature = 0.0;
    int max_tokens = 256;
    std::vector<std::string> script; ///< mock only

    void validate() const;
};

/// Env var consulted for the remote chat endpoint bearer token.
inline constexpr const char* kLlmApiKeyEnv = "POQD_LLM_API_KEY";

/// Single-turn chat client. A scripted client replays its canned
/// responses in order and repeats the final entry once the script is
/// exhausted, so a finite script can drive an arbitrarily long run.
class LlmClient {
public:
    explicit LlmClient(LlmClientSpec spec);

    /// Returns the assistant reply for a single user message.
    /// Throws TransportError / ProtocolError on remote failures.
    std::string complete(const std::string& prompt);

    const LlmClientSpec& spec() const { return spec_; }
    std::size_t calls_made() const { return calls_; }

private:
    LlmClientSpec spec_;
    std::string api_key_;
    std::size_t cursor_ = 0;
    std::size_t calls_ = 0;
};

} // namespace poqd
