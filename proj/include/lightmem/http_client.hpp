#pragma once
// Minimal JSON-over-HTTP transport used by the model gateway and the HTTP
// embedding backend.

#include <chrono>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "lightmem/core.hpp"

namespace lightmem {

class GatewayError : public Error {
public:
    GatewayError(int status, const std::string& what) : Error("gateway", what), status_(status) {}
    /// HTTP status of the failed call, or 0 for transport failures.
    int status() const noexcept { return status_; }

private:
    int status_;
};

struct Endpoint {
    std::string base;  // scheme://host[:port]
    std::string path;  // /v1/...

    static Endpoint parse(const std::string& url) {
        auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) throw PreconditionError("endpoint url needs a scheme: " + url);
        auto path_start = url.find('/', scheme_end + 3);
        if (path_start == std::string::npos) return {url, "/"};
        return {url.substr(0, path_start), url.substr(path_start)};
    }
};

struct HttpOptions {
    int timeout_ms = 10000;
    int max_retries = 2;
    int backoff_base_ms = 200;
    std::string bearer_token;
};

/// POSTs `body` as JSON and returns the parsed response. Timeouts and non-2xx
/// statuses are retried with exponential backoff; the last failure is thrown
/// as a GatewayError carrying the status.
inline nlohmann::json post_json(const std::string& url, const nlohmann::json& body, const HttpOptions& opt) {
    auto ep = Endpoint::parse(url);
    int last_status = 0;
    std::string last_error;
    for (int attempt = 0; attempt <= opt.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(opt.backoff_base_ms << (attempt - 1)));
        httplib::Client cli(ep.base);
        auto secs = opt.timeout_ms / 1000;
        auto usecs = (opt.timeout_ms % 1000) * 1000;
        cli.set_connection_timeout(secs, usecs);
        cli.set_read_timeout(secs, usecs);
        cli.set_write_timeout(secs, usecs);
        httplib::Headers headers;
        if (!opt.bearer_token.empty()) headers.emplace("Authorization", "Bearer " + opt.bearer_token);
        auto res = cli.Post(ep.path, headers, body.dump(), "application/json");
        if (!res) {
            last_status = 0;
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_status = res->status;
            last_error = "endpoint returned status " + std::to_string(res->status);
            continue;
        }
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw GatewayError(res->status, std::string("response body is not JSON: ") + e.what());
        }
    }
    throw GatewayError(last_status, url + ": " + last_error);
}

}  // namespace lightmem
