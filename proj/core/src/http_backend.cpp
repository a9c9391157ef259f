#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include <cstdlib>

#include "rustport/llm_gateway.hpp"

using nlohmann::json;

namespace rustport::llm {

namespace {

struct Url {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Url split_url(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint is not an absolute URL: " + endpoint);
    auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace

HttpBackend::HttpBackend(BackendSpec spec) : spec_(std::move(spec)) {
    split_url(spec_.endpoint);  // validate early
}

AttemptResult HttpBackend::attempt(const Request& request) {
    AttemptResult result;
    Url url = split_url(spec_.endpoint);

    httplib::Headers headers;
    if (!spec_.auth_env.empty()) {
        const char* secret = std::getenv(spec_.auth_env.c_str());
        if (!secret || !*secret) {
            result.status = AttemptStatus::permanent_failure;
            result.error = "environment variable " + spec_.auth_env + " is not set";
            return result;
        }
        headers.emplace("Authorization", std::string("Bearer ") + secret);
    }

    json body = {
        {"model", spec_.model},
        {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
        {"temperature", request.params.temperature},
        {"max_tokens", request.params.max_tokens},
    };
    if (request.params.top_p) body["top_p"] = *request.params.top_p;
    if (request.params.top_k) body["top_k"] = *request.params.top_k;

    httplib::Client client(url.origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(spec_.request_timeout).count();
    client.set_read_timeout(static_cast<time_t>(secs), 0);
    client.set_write_timeout(static_cast<time_t>(secs), 0);
    client.set_connection_timeout(30, 0);

    auto res = client.Post(url.path, headers, body.dump(), "application/json");
    if (!res) {
        result.status = AttemptStatus::transient_failure;
        result.error = "transport error: " + httplib::to_string(res.error());
        return result;
    }
    if (res->status == 429 || res->status >= 500) {
        result.status = AttemptStatus::transient_failure;
        result.error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 512);
        return result;
    }
    if (res->status != 200) {
        result.status = AttemptStatus::permanent_failure;
        result.error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 512);
        return result;
    }
    try {
        json reply = json::parse(res->body);
        const json& choice = reply.at("choices").at(0);
        result.response.text = choice.at("message").at("content").get<std::string>();
        std::string finish = choice.value("finish_reason", std::string("stop"));
        result.response.finish_reason =
            finish == "length" ? FinishReason::length_truncated : FinishReason::complete;
        if (reply.contains("usage")) {
            result.response.usage.prompt_tokens = reply["usage"].value("prompt_tokens", 0);
            result.response.usage.completion_tokens = reply["usage"].value("completion_tokens", 0);
        }
        result.status = AttemptStatus::ok;
    } catch (const json::exception& e) {
        result.status = AttemptStatus::permanent_failure;
        result.error = std::string("malformed completion payload: ") + e.what();
    }
    return result;
}

}  // namespace rustport::llm
