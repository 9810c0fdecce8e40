#pragma once

#include <memory>
#include <thread>

#include "leakprobe/sim.hpp"

namespace leakprobe {

/// Serves a SimTarget over the same chat-completion wire shape the HTTP
/// backend speaks, so the live client can be exercised without any external
/// endpoint.
class SimServer {
public:
    explicit SimServer(SimTargetConfig config);
    ~SimServer();

    SimServer(const SimServer&) = delete;
    SimServer& operator=(const SimServer&) = delete;

    /// Binds and serves on a background thread; port 0 picks a free port.
    /// Returns the bound port.
    int start(const std::string& host = "127.0.0.1", int port = 0);

    /// Serves on the calling thread until stopped (CLI serve mode).
    void run(const std::string& host, int port);

    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::thread thread_;
};

}  // namespace leakprobe
