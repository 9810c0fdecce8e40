#include "leakprobe/conversation.hpp"

namespace leakprobe {

std::string_view role_name(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

Role role_from_name(std::string_view name) {
    if (name == "system") return Role::system;
    if (name == "user") return Role::user;
    if (name == "assistant") return Role::assistant;
    throw FatalError("unknown role: " + std::string(name));
}

const std::string& Conversation::last_user_content() const {
    for (auto it = turns.rbegin(); it != turns.rend(); ++it) {
        if (it->role == Role::user) return it->content;
    }
    throw FatalError("conversation has no user turn");
}

nlohmann::json conversation_to_json(const Conversation& conv) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Turn& t : conv.turns) {
        arr.push_back({{"role", std::string(role_name(t.role))}, {"content", t.content}});
    }
    return arr;
}

Conversation conversation_from_json(const nlohmann::json& j) {
    Conversation conv;
    for (const auto& item : j) {
        Turn t;
        t.role = role_from_name(item.at("role").get<std::string>());
        t.content = item.at("content").get<std::string>();
        conv.turns.push_back(std::move(t));
    }
    return conv;
}

}  // namespace leakprobe
