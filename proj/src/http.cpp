#include "poqd/http.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "poqd/errors.hpp"
#include "poqd/rng.hpp"

namespace poqd {

Endpoint parse_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint url '" + url + "' has no scheme");
    }
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw ConfigError("endpoint url '" + url + "': unsupported scheme '" + scheme + "'");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == scheme_end + 3) {
        throw ConfigError("endpoint url '" + url + "' has an empty host");
    }
    Endpoint ep;
    if (path_start == std::string::npos) {
        ep.origin = url;
    } else {
        ep.origin = url.substr(0, path_start);
        ep.base_path = url.substr(path_start);
        while (!ep.base_path.empty() && ep.base_path.back() == '/') ep.base_path.pop_back();
    }
    return ep;
}

std::string api_key_from_env(const char* env_var) {
    const char* v = std::getenv(env_var);
    return v == nullptr ? std::string{} : std::string{v};
}

std::string post_json(const std::string& endpoint_url, const std::string& path,
                      const nlohmann::json& body, const std::string& api_key,
                      const RetryPolicy& policy) {
    const Endpoint ep = parse_endpoint(endpoint_url);
    httplib::Client client(ep.origin);
    client.set_connection_timeout(10);
    client.set_read_timeout(60);

    httplib::Headers headers;
    if (!api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key);
    }

    const std::string payload = body.dump();
    const std::string full_path = ep.base_path + path;

    // Jitter is decorrelation noise on a non-reproducible path; a clock
    // seed is fine here.
    Rng jitter_rng(static_cast<std::uint64_t>(
        std::chrono::steady_clock::now().time_since_epoch().count()));

    std::string last_error;
    for (int attempt = 0; attempt < policy.attempts; ++attempt) {
        if (attempt > 0) {
            const double base = policy.initial_backoff_ms * static_cast<double>(1 << (attempt - 1));
            const double factor = 1.0 + jitter_rng.uniform(-policy.jitter, policy.jitter);
            std::this_thread::sleep_for(
                std::chrono::milliseconds(static_cast<long>(base * factor)));
        }
        auto res = client.Post(full_path, headers, payload, "application/json");
        if (!res) {
            last_error = "connection failed (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status >= 200 && res->status < 300) {
            return res->body;
        }
        last_error = "HTTP " + std::to_string(res->status);
    }
    throw TransportError("POST " + ep.origin + full_path + " failed after " +
                         std::to_string(policy.attempts) + " attempts: " + last_error);
}

} // namespace poqd
