#include "leakprobe/http_backend.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "leakprobe/util.hpp"

namespace leakprobe {

nlohmann::json http_config_to_json(const HttpBackendConfig& cfg) {
    return {
        {"base_url", cfg.base_url},
        {"path", cfg.path},
        {"auth_env_var", cfg.auth_env_var},
        {"rate_limit_per_s", cfg.rate_limit_per_s},
        {"max_retries", cfg.max_retries},
        {"backoff_base_s", cfg.backoff_base_s},
        {"multi_sample", cfg.multi_sample},
    };
}

HttpBackendConfig http_config_from_json(const nlohmann::json& j) {
    HttpBackendConfig cfg;
    cfg.base_url = j.value("base_url", cfg.base_url);
    cfg.path = j.value("path", cfg.path);
    cfg.auth_env_var = j.value("auth_env_var", cfg.auth_env_var);
    cfg.rate_limit_per_s = j.value("rate_limit_per_s", cfg.rate_limit_per_s);
    cfg.max_retries = j.value("max_retries", cfg.max_retries);
    cfg.backoff_base_s = j.value("backoff_base_s", cfg.backoff_base_s);
    cfg.multi_sample = j.value("multi_sample", cfg.multi_sample);
    return cfg;
}

RateLimiter::RateLimiter(double per_second) : next_(std::chrono::steady_clock::now()) {
    if (per_second > 0.0) {
        interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(1.0 / per_second));
    }
}

void RateLimiter::acquire() {
    if (interval_.count() == 0) return;
    std::chrono::steady_clock::time_point wake;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto now = std::chrono::steady_clock::now();
        wake = std::max(now, next_);
        next_ = wake + interval_;
    }
    std::this_thread::sleep_until(wake);
}

HttpBackend::HttpBackend(HttpBackendConfig config)
    : config_(std::move(config)), limiter_(config_.rate_limit_per_s) {}

std::string HttpBackend::id() const {
    return config_.multi_sample ? "http(multi)" : "http(sequential)";
}

std::vector<std::string> HttpBackend::request_once(const Conversation& conversation,
                                                   const GenerationParams& params,
                                                   int n_for_call) {
    nlohmann::json body = {
        {"model", params.model_id},
        {"messages", conversation_to_json(conversation)},
        {"n", n_for_call},
        {"temperature", params.temperature},
        {"max_tokens", params.max_tokens},
    };
    std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            double delay = config_.backoff_base_s * static_cast<double>(1 << (attempt - 1));
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        limiter_.acquire();

        httplib::Client client(config_.base_url);
        client.set_connection_timeout(std::chrono::duration<double>(params.timeout_s));
        client.set_read_timeout(std::chrono::duration<double>(params.timeout_s));
        httplib::Headers headers;
        if (const char* token = std::getenv(config_.auth_env_var.c_str());
            token && *token != '\0') {
            headers.emplace("Authorization", std::string("Bearer ") + token);
        }
        auto res = client.Post(config_.path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403) {
            throw FatalBackendError("endpoint rejected credentials (status " +
                                    std::to_string(res->status) + ")");
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "endpoint returned status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw BackendError("endpoint returned status " + std::to_string(res->status) + ": " +
                               res->body.substr(0, 200));
        }
        try {
            nlohmann::json reply = nlohmann::json::parse(res->body);
            std::vector<std::string> texts;
            for (const auto& choice : reply.at("choices")) {
                texts.push_back(choice.at("message").at("content").get<std::string>());
            }
            if (static_cast<int>(texts.size()) != n_for_call) {
                throw BackendError("endpoint returned " + std::to_string(texts.size()) +
                                   " choices, expected " + std::to_string(n_for_call));
            }
            return texts;
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("malformed completion payload: ") + e.what());
        }
    }
    throw BackendError("request failed after " + std::to_string(config_.max_retries + 1) +
                       " attempts: " + last_error);
}

std::vector<std::string> HttpBackend::complete(const Conversation& conversation,
                                               const GenerationParams& params) {
    if (params.n < 1) throw BackendError("n must be >= 1");
    if (!conversation.ends_with_user()) {
        throw BackendError("conversation must end with a user turn");
    }
    if (config_.multi_sample) {
        return request_once(conversation, params, params.n);
    }
    std::vector<std::string> texts;
    texts.reserve(static_cast<size_t>(params.n));
    for (int i = 0; i < params.n; ++i) {
        auto one = request_once(conversation, params, 1);
        texts.push_back(std::move(one.front()));
    }
    return texts;
}

}  // namespace leakprobe
