#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "owlsim/sim/environment.hpp"

namespace owlsim::taskgen {

struct Goal {
    std::map<std::string, std::string> slot_constraints;
    std::optional<std::string> goal_screen;
    bool operator==(const Goal&) const = default;
};

/// A generated instruction with a machine-checkable goal and a replayable solution.
struct TaskQuery {
    std::string task_id;
    std::string instruction;
    std::vector<std::string> app_names;
    Goal goal;
    std::vector<sim::Action> oracle_actions;
    int difficulty = 1;
    std::optional<std::string> guidance;

    /// App whose screens the goal refers to.
    const std::string& primary_app() const { return app_names.front(); }
    bool operator==(const TaskQuery&) const = default;
};

Json to_json(const TaskQuery& t);
TaskQuery task_from_json(const Json& j);
std::vector<TaskQuery> read_pool(const std::string& path);
void write_pool(const std::string& path, const std::vector<TaskQuery>& pool);

sim::Observation reset(sim::Environment& env, const TaskQuery& task);
bool goal_satisfied(const sim::EnvState& s, const TaskQuery& task);
inline bool goal_satisfied(const sim::Environment& env, const TaskQuery& task) {
    return goal_satisfied(env.state(), task);
}

}  // namespace owlsim::taskgen
