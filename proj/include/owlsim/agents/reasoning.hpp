#pragma once

#include <optional>
#include <string>

#include "owlsim/sim/environment.hpp"

namespace owlsim::agents {

/// Closing clause that states the action a reasoning text commits to, e.g.
/// "so I click the menu button (to_menu)".
std::string intent_clause(const sim::Action& action, const sim::Observation& obs);

struct Intent {
    sim::ActionKind kind = sim::ActionKind::Wait;
    std::optional<std::string> widget_id;
    std::optional<std::string> text;
    std::optional<std::string> app;
    std::optional<sim::ScrollDirection> direction;
    std::optional<sim::TerminateStatus> status;
};

/// Inverse of intent_clause over the last "so I ..." clause in `reasoning`.
std::optional<Intent> parse_intent(std::string_view reasoning);

/// Action described by an intent, when it names every parameter.
std::optional<sim::Action> intent_action(const Intent& intent);

/// Short past-tense account used as end-to-end conclusion text.
std::string conclusion_for(const sim::Action& action, const sim::TransitionReport& report);

/// Visible note-worthy values: editor contents and "Key: value" labels.
std::map<std::string, std::string> extract_notes(const sim::Observation& obs);

}  // namespace owlsim::agents
