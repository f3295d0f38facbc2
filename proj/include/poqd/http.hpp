#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace poqd {

/// 3 attempts, exponential backoff from 250 ms, jitter +-20%.
struct RetryPolicy {
    int attempts = 3;
    int initial_backoff_ms = 250;
    double jitter = 0.2;
};

struct Endpoint {
    std::string origin;    ///< scheme://host[:port]
    std::string base_path; ///< optional path prefix, no trailing slash
};

/// Splits "http://host:1234/base" into origin and base path.
/// Throws ConfigError on malformed URLs.
Endpoint parse_endpoint(const std::string& url);

/// POSTs `body` to {endpoint}{path} as application/json and returns the
/// response body. Retries per `policy` on connection failures and any
/// non-2xx status; throws TransportError once attempts are exhausted.
/// `api_key`, when non-empty, is sent as a bearer token.
std::string post_json(const std::string& endpoint_url, const std::string& path,
                      const nlohmann::json& body, const std::string& api_key,
                      const RetryPolicy& policy = {});

/// Reads an API key from the environment; empty when unset.
std::string api_key_from_env(const char* env_var);

} // namespace poqd
