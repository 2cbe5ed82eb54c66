#ifdef VULNMGR_WITH_TLS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

#include <chrono>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "vulnmgr/gateway.hpp"

namespace vulnmgr::llm {
namespace {

// "https://host:port/path" -> {"https://host:port", "/path"}
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos)
        throw std::runtime_error("endpoint must include a scheme: " + endpoint);
    auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

bool transport_status(int code) { return code == 429 || code >= 500; }

}  // namespace

ChatMessage LiveProvider::complete(const ProviderConfig& config, const std::string&,
                                   const std::vector<ChatMessage>& messages,
                                   const std::vector<ToolSchema>& tools) {
    if (config.endpoint.empty()) throw std::runtime_error("live provider: endpoint not set");
    auto [base, path] = split_endpoint(config.endpoint);
    const char* key = config.api_key_env.empty() ? nullptr
                                                 : std::getenv(config.api_key_env.c_str());

    nlohmann::json body = build_chat_request(config, messages, tools);
    std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 1; attempt <= config.retry_attempts; ++attempt) {
        if (attempt > 1)
            std::this_thread::sleep_for(std::chrono::milliseconds(config.retry_backoff_ms));
        httplib::Client client(base);
        client.set_connection_timeout(config.request_timeout_s, 0);
        client.set_read_timeout(config.request_timeout_s, 0);
        httplib::Headers headers;
        if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (transport_status(res->status)) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw std::runtime_error("model endpoint rejected request (HTTP " +
                                     std::to_string(res->status) + "): " + res->body);
        return parse_chat_response(nlohmann::json::parse(res->body));
    }
    throw std::runtime_error("model endpoint unreachable after " +
                             std::to_string(config.retry_attempts) +
                             " attempts: " + last_error);
}

}  // namespace vulnmgr::llm
