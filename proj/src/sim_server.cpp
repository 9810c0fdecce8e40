#include "leakprobe/sim_server.hpp"

#include <httplib.h>

#include "leakprobe/util.hpp"

namespace leakprobe {

struct SimServer::Impl {
    explicit Impl(SimTargetConfig config) : target(std::move(config)) {
        server.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                   httplib::Response& res) {
            handle(req, res);
        });
    }

    void handle(const httplib::Request& req, httplib::Response& res) {
        try {
            nlohmann::json body = nlohmann::json::parse(req.body);
            Conversation conv = conversation_from_json(body.at("messages"));
            GenerationParams params;
            params.n = body.value("n", 1);
            params.temperature = body.value("temperature", 1.0);
            params.max_tokens = body.value("max_tokens", 512);
            params.model_id = body.value("model", "sim");

            std::vector<std::string> texts = target.complete(conv, params);
            nlohmann::json choices = nlohmann::json::array();
            for (size_t i = 0; i < texts.size(); ++i) {
                choices.push_back({{"index", i},
                                   {"message", {{"role", "assistant"}, {"content", texts[i]}}},
                                   {"finish_reason", "stop"}});
            }
            nlohmann::json reply = {{"object", "chat.completion"},
                                    {"model", params.model_id},
                                    {"choices", choices}};
            res.set_content(reply.dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            nlohmann::json err = {{"error", {{"message", e.what()}}}};
            res.set_content(err.dump(), "application/json");
        }
    }

    SimTarget target;
    httplib::Server server;
};

SimServer::SimServer(SimTargetConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

SimServer::~SimServer() { stop(); }

int SimServer::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
        if (bound <= 0) throw FatalError("simulator server failed to bind a port");
    } else if (!impl_->server.bind_to_port(host, port)) {
        throw FatalError("simulator server failed to bind port " + std::to_string(port));
    }
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void SimServer::run(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) {
        throw FatalError("simulator server failed to listen on " + host + ":" +
                         std::to_string(port));
    }
}

void SimServer::stop() {
    impl_->server.stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace leakprobe
