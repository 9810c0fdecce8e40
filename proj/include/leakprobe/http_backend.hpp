#pragma once

#include <chrono>
#include <mutex>
#include <string>

#include <json.hpp>

#include "leakprobe/backend.hpp"

namespace leakprobe {

/// Chat-completion endpoint client settings. The auth token is read from the
/// environment variable named here, never from the config file.
struct HttpBackendConfig {
    std::string base_url = "http://127.0.0.1:8080";
    std::string path = "/v1/chat/completions";
    std::string auth_env_var = "LEAKPROBE_API_TOKEN";
    double rate_limit_per_s = 0.0;  // 0 disables throttling
    int max_retries = 3;
    double backoff_base_s = 0.5;    // doubled per retry
    bool multi_sample = true;       // one n-sample request vs n sequential calls
};

nlohmann::json http_config_to_json(const HttpBackendConfig& cfg);
HttpBackendConfig http_config_from_json(const nlohmann::json& j);

/// Serializes request starts so the observed request rate never exceeds the
/// configured per-second limit. Shared by every worker using the backend.
class RateLimiter {
public:
    explicit RateLimiter(double per_second);
    void acquire();

private:
    std::chrono::steady_clock::duration interval_{};
    std::chrono::steady_clock::time_point next_;
    std::mutex mutex_;
};

/// Live target over a chat-completion HTTP endpoint: message array in,
/// choices out. Retries with exponential backoff on transport errors, 429 and
/// 5xx; auth failures are fatal. When the endpoint cannot multi-sample,
/// n sequential single-sample requests are issued instead, each in a fresh
/// session.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);

    std::vector<std::string> complete(const Conversation& conversation,
                                      const GenerationParams& params) override;
    std::string id() const override;

private:
    std::vector<std::string> request_once(const Conversation& conversation,
                                          const GenerationParams& params, int n_for_call);

    HttpBackendConfig config_;
    RateLimiter limiter_;
};

}  // namespace leakprobe
