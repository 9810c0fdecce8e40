#include "leakprobe/backend.hpp"

#include <cstdio>

#include "leakprobe/util.hpp"

namespace leakprobe {

std::string conversation_fingerprint(const Conversation& conversation,
                                     const GenerationParams& params) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const Turn& turn : conversation.turns) {
        h = fnv1a64(role_name(turn.role), h);
        h = fnv1a64("\x1f", h);
        h = fnv1a64(turn.content, h);
        h = fnv1a64("\x1e", h);
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "n=%d;t=%.6g;m=", params.n, params.temperature);
    h = fnv1a64(buf, h);
    h = fnv1a64(params.model_id, h);
    return to_hex64(h);
}

}  // namespace leakprobe
