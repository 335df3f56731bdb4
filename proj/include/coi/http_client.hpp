#pragma once

// Minimal JSON-over-HTTP transport for OpenAI-compatible endpoints.

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "coi/error.hpp"

namespace coi {

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
};

struct HttpEndpoint {
    std::string base_url = "https://api.openai.com/v1";  // scheme://host[:port][/prefix]
    std::string api_key;
    std::chrono::seconds timeout{120};

    /// Reads the key from an environment variable; an unset variable leaves it empty.
    static std::string key_from_env(const std::string& var) {
        const char* v = std::getenv(var.c_str());
        return v ? std::string(v) : std::string();
    }
};

namespace detail {

struct SplitUrl {
    std::string origin;
    std::string prefix;
};

inline SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw InvalidArgument("endpoint URL needs a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    std::string prefix = url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, path_start), prefix};
}

inline bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace detail

/// POSTs `body` to `endpoint.base_url + path` and returns the parsed JSON response.
///
/// Transport errors, 408, 429 and 5xx responses are retried with exponential backoff.
/// Other non-2xx statuses fail immediately.
inline nlohmann::json post_json(const HttpEndpoint& endpoint, const std::string& path,
                                const nlohmann::json& body, const RetryPolicy& retry) {
    auto url = detail::split_url(endpoint.base_url);
    httplib::Client client(url.origin);
    client.set_connection_timeout(endpoint.timeout);
    client.set_read_timeout(endpoint.timeout);
    client.set_write_timeout(endpoint.timeout);
    httplib::Headers headers;
    if (!endpoint.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint.api_key);

    const std::string payload = body.dump();
    auto backoff = retry.initial_backoff;
    std::string last_error;
    int attempt = 0;
    for (attempt = 1; attempt <= retry.max_attempts; ++attempt) {
        auto res = client.Post(url.prefix + path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
        } else if (res->status >= 200 && res->status < 300) {
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::parse_error& e) {
                throw ProviderError(std::string("malformed response body: ") + e.what(), attempt);
            }
        } else if (!detail::retryable_status(res->status)) {
            throw ProviderError("HTTP " + std::to_string(res->status) + ": " + res->body, attempt);
        } else {
            last_error = "HTTP " + std::to_string(res->status);
        }
        if (attempt < retry.max_attempts) {
            std::this_thread::sleep_for(backoff);
            backoff = std::chrono::milliseconds(
                static_cast<long long>(static_cast<double>(backoff.count()) * retry.multiplier));
        }
    }
    throw ProviderError(last_error, retry.max_attempts);
}

}  // namespace coi
