#pragma once

#include <optional>
#include <string>
#include <vector>

#include "owlsim/sim/environment.hpp"

namespace owlsim::agents {

enum class SubgoalKind { Open, Navigate, Enter, Select, Turn, GoBack, Finish };

/// Structured reading of a subgoal string such as "enter 'pizza' in search".
struct Subgoal {
    SubgoalKind kind = SubgoalKind::Finish;
    std::string target;  // app for Open, screen for Navigate/GoBack
    std::string slot;
    std::string value;
    bool operator==(const Subgoal&) const = default;
};

std::string format_subgoal(const Subgoal& g);
/// Accepts a trailing " (n)" repetition marker.
std::optional<Subgoal> parse_subgoal(std::string_view text);

/// Subgoal achieved by taking `action` in `before`; nullopt for scroll, wait and failure termination.
std::optional<Subgoal> subgoal_for(const sim::Environment& env, const sim::EnvState& before, const sim::Action& action);

/// One subgoal per phase of `actions` replayed from `start`. Scrolls join the next phase.
std::vector<std::string> phase_subgoals(const sim::Environment& env, sim::EnvState start,
                                        const std::vector<sim::Action>& actions);

bool subgoal_complete(const Subgoal& g, const sim::EnvState& s);

/// `text`, or `text (n)` for the smallest n that collides with neither list.
std::string fresh_subgoal(const std::string& text, const std::vector<std::string>& pending,
                          const std::vector<std::string>& completed);

}  // namespace owlsim::agents
