#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "leakprobe/conversation.hpp"

namespace leakprobe {

/// Sampling parameters for one target call.
struct GenerationParams {
    int n = 5;                 // generations per call
    double temperature = 1.0;
    int max_tokens = 512;
    double timeout_s = 30.0;
    std::string model_id = "default";
};

/// Trial-level failure: the trial is marked failed and the run continues.
class BackendError : public std::runtime_error {
public:
    explicit BackendError(const std::string& what) : std::runtime_error(what) {}
};

/// Run-level failure: bad auth, bad config, strict replay miss. Aborts the run.
class FatalBackendError : public std::runtime_error {
public:
    explicit FatalBackendError(const std::string& what) : std::runtime_error(what) {}
};

/// Uniform target interface: deliver a conversation, receive n generations.
/// Every call is an isolated session; the conversation is the only context a
/// target ever sees. Implementations must be safe to call from many threads.
class Backend {
public:
    virtual ~Backend() = default;

    /// Returns exactly params.n response texts in generation order.
    virtual std::vector<std::string> complete(const Conversation& conversation,
                                              const GenerationParams& params) = 0;

    virtual std::string id() const = 0;
};

/// Stable 64-bit FNV-1a fingerprint of (turns, n, temperature, model_id),
/// hex-encoded. Keys transcript replay; the exact construction is documented
/// in the README and must not change.
std::string conversation_fingerprint(const Conversation& conversation,
                                     const GenerationParams& params);

}  // namespace leakprobe
