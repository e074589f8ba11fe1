#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "owlsim/taskgen/task.hpp"

namespace owlsim::taskgen {

struct RouteBinding {
    std::string slot_key;
    std::string value;
    std::size_t screen_index = 0;  // route position whose screen hosts the editor
};

/// The screen sequence a task's solution walks through, with the slot edits made on the way.
struct Route {
    std::string app;
    std::vector<std::string> screens;
    std::vector<RouteBinding> bindings;

    std::optional<std::size_t> index_of(std::string_view screen) const;
};

/// Recovers the route by replaying the task's oracle actions.
Route route_of(const TaskQuery& task, const sim::AppRegistry& apps);

/// Next action of the shortest-known solution from `state`, or nullopt when none exists.
std::optional<sim::Action> next_oracle_action(const sim::Environment& env, const sim::EnvState& state,
                                              const Route& route);

/// Complete solution from `state` (ending in Terminate(success)); nullopt when the planner is stuck.
std::optional<std::vector<sim::Action>> oracle_plan(const sim::Environment& env, const sim::EnvState& state,
                                                    const Route& route, std::size_t limit = 256);

inline constexpr std::size_t kUnreachable = std::numeric_limits<std::size_t>::max();

/// Remaining oracle actions from `state`; kUnreachable when no plan exists, 0 once terminated successfully.
std::size_t oracle_distance(const sim::Environment& env, const sim::EnvState& state, const Route& route,
                            const TaskQuery& task);

/// Scroll needed to bring `widget` into view, or nullopt when already visible.
std::optional<sim::Action> scroll_toward(const sim::Screen& screen, const sim::Widget& widget, int offset);

}  // namespace owlsim::taskgen
