#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "leakprobe/util.hpp"

namespace leakprobe {

enum class Role { system, user, assistant };

std::string_view role_name(Role role);
Role role_from_name(std::string_view name);

/// One role-tagged utterance. Content is never empty in a well-formed turn.
struct Turn {
    Role role = Role::user;
    std::string content;

    bool operator==(const Turn&) const = default;
};

/// The prompt delivered to a target: an ordered list of turns ending with a
/// user turn (the target must have something to answer).
struct Conversation {
    std::vector<Turn> turns;

    bool ends_with_user() const {
        return !turns.empty() && turns.back().role == Role::user;
    }

    const std::string& last_user_content() const;

    bool operator==(const Conversation&) const = default;
};

nlohmann::json conversation_to_json(const Conversation& conv);
Conversation conversation_from_json(const nlohmann::json& j);

}  // namespace leakprobe
